//! Time-series ingestion and the windowing that turns series into regression
//! datasets.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::regressor::Dataset;

/// Named channels of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    names: Vec<String>,
    channels: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(names: Vec<String>, channels: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != channels.len() {
            return Err(Error::dims("time series channels", names.len(), channels.len()));
        }
        if let Some(first) = channels.first() {
            if let Some(bad) = channels.iter().find(|c| c.len() != first.len()) {
                return Err(Error::dims("channel length", first.len(), bad.len()));
            }
        }
        for (i, name) in names.iter().enumerate() {
            if names[..i].contains(name) {
                return Err(Error::InvalidDataset(format!("duplicate channel `{name}`")));
            }
        }
        if channels.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput("time series"));
        }
        Ok(Self { names, channels })
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn channel(&self, name: &str) -> Result<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.channels[i].as_slice())
            .ok_or_else(|| Error::ChannelMissing(name.to_string()))
    }

    /// Row `t` across all channels, in channel order.
    pub fn sample(&self, t: usize) -> Vec<f64> {
        self.channels.iter().map(|c| c[t]).collect()
    }
}

/// Reads the named columns of a headered CSV file. An empty `schema` selects
/// every column in file order.
pub fn load_csv(path: impl AsRef<Path>, schema: &[&str]) -> Result<TimeSeries> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(e, 1))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_error(e, 1))?
        .iter()
        .map(str::to_string)
        .collect();

    let names: Vec<String> = if schema.is_empty() {
        header.clone()
    } else {
        schema.iter().map(|s| s.to_string()).collect()
    };
    let columns = names
        .iter()
        .map(|name| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn(name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut channels = vec![Vec::new(); names.len()];
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        for (dst, &col) in channels.iter_mut().zip(&columns) {
            let cell = record.get(col).unwrap_or("");
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: col + 1,
                message: format!("`{cell}` is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: col + 1,
                    message: format!("`{cell}` is not finite"),
                });
            }
            dst.push(value);
        }
    }
    if channels.first().is_none_or(Vec::is_empty) {
        return Err(Error::Parse {
            row: 2,
            column: 0,
            message: "no data rows".into(),
        });
    }
    TimeSeries::new(names, channels)
}

fn csv_error(e: csv::Error, fallback_row: usize) -> Error {
    let row = e
        .position()
        .map_or(fallback_row, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse {
            row,
            column: 0,
            message: format!("{kind:?}"),
        },
    }
}

/// NARX regression rows `[u_{t−d} … u_{t−1}, y_{t−d} … y_{t−1}]` with label
/// `y_t` for `t = d..T` (0-based), giving `T − d` rows of `2d` features.
pub fn narx_window(ts: &TimeSeries, input: &str, output: &str, d: usize) -> Result<Dataset> {
    let u = ts.channel(input)?;
    let y = ts.channel(output)?;
    let t_len = ts.len();
    if d == 0 {
        return Err(Error::InsufficientData("delay d must be >= 1".into()));
    }
    if t_len <= d {
        return Err(Error::InsufficientData(format!(
            "{t_len} samples cannot support delay d={d}"
        )));
    }
    let rows = t_len - d;
    let mut inputs = Vec::with_capacity(rows * 2 * d);
    for t in d..t_len {
        inputs.extend_from_slice(&u[t - d..t]);
        inputs.extend_from_slice(&y[t - d..t]);
    }
    Dataset::new(inputs, y[d..].to_vec(), 2 * d)
}

/// Non-overlapping blocks of `r` samples. Row `w` concatenates samples
/// `w·r .. (w+1)·r` of each listed channel, in order; its label is the change
/// of `label` across the block, `label[(w+1)·r − 1] − label[w·r]`.
pub fn multichannel_window(
    ts: &TimeSeries,
    channels: &[&str],
    r: usize,
    label: &str,
) -> Result<Dataset> {
    if channels.is_empty() {
        return Err(Error::InvalidDataset("no input channels selected".into()));
    }
    if r == 0 {
        return Err(Error::InsufficientData("block length r must be >= 1".into()));
    }
    let sources = channels
        .iter()
        .map(|c| ts.channel(c))
        .collect::<Result<Vec<_>>>()?;
    let target = ts.channel(label)?;
    let blocks = ts.len() / r;
    if blocks == 0 {
        return Err(Error::InsufficientData(format!(
            "{} samples are fewer than one block of r={r}",
            ts.len()
        )));
    }
    let mut inputs = Vec::with_capacity(blocks * r * sources.len());
    let mut labels = Vec::with_capacity(blocks);
    for w in 0..blocks {
        let span = w * r..(w + 1) * r;
        for src in &sources {
            inputs.extend_from_slice(&src[span.clone()]);
        }
        labels.push(target[span.end - 1] - target[span.start]);
    }
    Dataset::new(inputs, labels, r * sources.len())
}

/// One single-output dataset per label channel.
pub fn multichannel_datasets(
    ts: &TimeSeries,
    channels: &[&str],
    r: usize,
    labels: &[&str],
) -> Result<Vec<Dataset>> {
    labels
        .iter()
        .map(|l| multichannel_window(ts, channels, r, l))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// First part for training, remainder for testing, no shuffling.
    SequentialPrefix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    train_fraction: f64,
    mode: SplitMode,
}

impl SplitSpec {
    pub fn new(train_fraction: f64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidDataset(format!(
                "train fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        Ok(Self {
            train_fraction,
            mode: SplitMode::SequentialPrefix,
        })
    }

    pub fn train_fraction(&self) -> f64 {
        self.train_fraction
    }

    pub fn mode(&self) -> SplitMode {
        self.mode
    }

    /// Training size `floor(N·fraction)`, kept within `1..N` so both parts are
    /// non-empty.
    pub fn train_len(&self, total: usize) -> usize {
        ((total as f64 * self.train_fraction).floor() as usize).clamp(1, total - 1)
    }
}

pub fn split(data: &Dataset, s: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let total = data.len();
    if total < 2 {
        return Err(Error::InsufficientData(format!(
            "cannot split {total} sample(s)"
        )));
    }
    let cut = match s.mode() {
        SplitMode::SequentialPrefix => s.train_len(total),
    };
    Ok((data.slice(0..cut), data.slice(cut..total)))
}

/// Mean over samples of the squared error.
pub fn mse(pred: &[f64], truth: &[f64]) -> f64 {
    assert_eq!(pred.len(), truth.len(), "prediction/label length mismatch");
    if pred.is_empty() {
        return 0.0;
    }
    pred.iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64
}

pub fn variance(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64
}

const SYNTH_BURN_IN: usize = 50;
const SYNTH_NOISE: f64 = 0.01;

/// Synthetic input/output series with channels `u` and `y`.
///
/// `u` is uniform white noise on `[−1, 1]` passed through the low-pass
/// filter `u_t = 0.7·u_{t−1} + 0.3·e_t`. The output follows
///
/// ```text
/// y_t = 0.5·y_{t−1} − 0.3·y_{t−2} + 0.8·u_{t−1} + 0.4·u_{t−2}
///     + 0.2·y_{t−1}·y_{t−2} + 0.3·u_{t−1}·u_{t−2} + v_t
/// ```
///
/// with process noise `v_t` uniform on `[−0.01, 0.01]`. Both products pair
/// adjacent lags, so with `d ≥ 2` and `f ≥ 2` the noise-free part is exactly
/// representable by the banded model (no diagonal terms, no constant). The
/// noise keeps the lagged outputs from being exact functions of each other,
/// which would make the regressor rank-deficient. The first 50 samples are
/// discarded as burn-in.
pub fn synth_narx(len: usize, seed: u64) -> Result<TimeSeries> {
    if len < 20 {
        return Err(Error::InsufficientData(format!(
            "synthetic series needs at least 20 samples, got {len}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = len + SYNTH_BURN_IN;
    let mut u = vec![0.0; total];
    let mut y = vec![0.0; total];
    for t in 1..total {
        u[t] = 0.7 * u[t - 1] + 0.3 * rng.gen_range(-1.0..=1.0);
    }
    for t in 2..total {
        y[t] = 0.5 * y[t - 1] - 0.3 * y[t - 2] + 0.8 * u[t - 1] + 0.4 * u[t - 2]
            + 0.2 * y[t - 1] * y[t - 2]
            + 0.3 * u[t - 1] * u[t - 2]
            + SYNTH_NOISE * rng.gen_range(-1.0..=1.0);
    }
    TimeSeries::new(
        vec!["u".into(), "y".into()],
        vec![u.split_off(SYNTH_BURN_IN), y.split_off(SYNTH_BURN_IN)],
    )
}

/// Channel names produced by [`synth_gps`]: nine IMU/attitude channels
/// followed by the two position channels.
pub const GPS_CHANNELS: [&str; 11] = [
    "ax", "ay", "az", "wx", "wy", "wz", "tx", "ty", "tz", "lat", "lon",
];

/// Synthetic IMU/attitude channels with integrated planar position, for
/// exercising the block-window pipeline. Heading `tz` drifts slowly; forward
/// speed follows `ax`; `lat`/`lon` integrate the resulting velocity.
pub fn synth_gps(len: usize, seed: u64) -> Result<TimeSeries> {
    if len < 20 {
        return Err(Error::InsufficientData(format!(
            "synthetic series needs at least 20 samples, got {len}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ch = vec![vec![0.0; len]; GPS_CHANNELS.len()];
    let dt = 0.005;
    let mut speed: f64 = 1.0;
    for t in 1..len {
        for (i, c) in ch.iter_mut().enumerate().take(6) {
            let noise: f64 = rng.gen_range(-1.0..=1.0);
            c[t] = 0.95 * c[t - 1] + 0.05 * noise * (1.0 + i as f64 * 0.1);
        }
        for axis in 0..3 {
            ch[6 + axis][t] = ch[6 + axis][t - 1] + dt * ch[3 + axis][t];
        }
        speed = (speed + dt * ch[0][t]).clamp(0.0, 3.0);
        let heading = ch[8][t];
        ch[9][t] = ch[9][t - 1] + dt * speed * heading.cos();
        ch[10][t] = ch[10][t - 1] + dt * speed * heading.sin();
    }
    TimeSeries::new(GPS_CHANNELS.iter().map(|s| s.to_string()).collect(), ch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn series(names: &[&str], chans: Vec<Vec<f64>>) -> TimeSeries {
        TimeSeries::new(names.iter().map(|s| s.to_string()).collect(), chans).unwrap()
    }

    fn write_tmp(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn narx_small_example() {
        let ts = series(&["u", "y"], vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        let d = narx_window(&ts, "u", "y", 1).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.row(0), &[1.0, 4.0]);
        assert_eq!(d.row(1), &[2.0, 5.0]);
        assert_eq!(d.labels(), &[5.0, 6.0]);
        assert!(matches!(
            narx_window(&ts, "u", "y", 3),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            narx_window(&ts, "u", "z", 1),
            Err(Error::ChannelMissing(_))
        ));
    }

    #[test]
    fn narx_sizes_for_robot_arm_length() {
        let t = 1018;
        let ts = series(&["u", "y"], vec![vec![0.5; t], vec![0.25; t]]);
        let d = narx_window(&ts, "u", "y", 5).unwrap();
        assert_eq!((d.len(), d.n_features()), (1013, 10));
        let (train, test) = split(&d, &SplitSpec::new(0.5).unwrap()).unwrap();
        assert_eq!((train.len(), test.len()), (506, 507));
    }

    #[test]
    fn narx_rows_shift_by_one() {
        let ts = synth_narx(60, 4).unwrap();
        let d = 4;
        let data = narx_window(&ts, "u", "y", d).unwrap();
        for i in 0..data.len() - 1 {
            assert_eq!(data.row(i + 1)[..d - 1], data.row(i)[1..d]);
            assert_eq!(data.row(i + 1)[d..2 * d - 1], data.row(i)[d + 1..2 * d]);
            assert_eq!(data.row(i + 1)[2 * d - 1], data.labels()[i]);
        }
    }

    #[test]
    fn multichannel_examples() {
        let names: Vec<String> = (0..9).map(|i| format!("c{i}")).chain(["lat".into()]).collect();
        let ts = TimeSeries::new(names.clone(), vec![vec![0.0; 80]; 10]).unwrap();
        let chans: Vec<&str> = names[..9].iter().map(String::as_str).collect();
        let d = multichannel_window(&ts, &chans, 40, "lat").unwrap();
        assert_eq!((d.len(), d.n_features()), (2, 360));

        let ts = series(&["a"], vec![vec![1.0, 3.0, 6.0]]);
        let d = multichannel_window(&ts, &["a"], 1, "a").unwrap();
        assert_eq!((d.len(), d.n_features()), (3, 1));

        let ts = series(
            &["a", "b", "p"],
            vec![
                (0..8).map(f64::from).collect(),
                (10..18).map(f64::from).collect(),
                vec![0.0, 1.0, 3.0, 6.0, 10.0, 15.0, 21.0, 28.0],
            ],
        );
        let d = multichannel_window(&ts, &["a", "b"], 4, "p").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.row(0), &[0.0, 1.0, 2.0, 3.0, 10.0, 11.0, 12.0, 13.0]);
        assert_eq!(d.row(1), &[4.0, 5.0, 6.0, 7.0, 14.0, 15.0, 16.0, 17.0]);
        assert_eq!(d.labels(), &[6.0, 18.0]);

        assert!(matches!(
            multichannel_window(&ts, &["a", "zz"], 4, "p"),
            Err(Error::ChannelMissing(_))
        ));
        assert!(matches!(
            multichannel_window(&ts, &["a"], 9, "p"),
            Err(Error::InsufficientData(_))
        ));
        let both = multichannel_datasets(&ts, &["a"], 4, &["p", "b"]).unwrap();
        assert_eq!(both[1].labels(), &[3.0, 3.0]);
    }

    #[test]
    fn split_sizes_and_order() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let data = Dataset::from_rows(&rows, (0..10).map(|i| i as f64 * 2.0).collect()).unwrap();
        let (a, b) = split(&data, &SplitSpec::new(0.5).unwrap()).unwrap();
        assert_eq!((a.len(), b.len()), (5, 5));
        let mut joined = a.labels().to_vec();
        joined.extend_from_slice(b.labels());
        assert_eq!(joined, data.labels());

        let two = Dataset::from_rows(&rows[..2], vec![0.0, 1.0]).unwrap();
        let (a, b) = split(&two, &SplitSpec::new(0.5).unwrap()).unwrap();
        assert_eq!((a.len(), b.len()), (1, 1));

        let one = Dataset::from_rows(&rows[..1], vec![0.0]).unwrap();
        assert!(split(&one, &SplitSpec::new(0.5).unwrap()).is_err());
        assert!(SplitSpec::new(0.0).is_err());
        assert!(SplitSpec::new(1.0).is_err());
    }

    #[test]
    fn csv_loading() {
        let f = write_tmp("u,y,extra\n1.5,2.25,x\n-0.1,3e-7,y\n");
        let ts = load_csv(f.path(), &["u", "y"]).unwrap();
        assert_eq!(ts.channel("u").unwrap(), &[1.5, -0.1]);
        assert_eq!(ts.channel("y").unwrap(), &[2.25, 3e-7]);

        assert!(matches!(
            load_csv(f.path(), &["u", "v"]),
            Err(Error::MissingColumn(ref c)) if c == "v"
        ));
        match load_csv(f.path(), &[]) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (2, 3)),
            other => panic!("unexpected {other:?}"),
        }

        let empty = write_tmp("u,y\n");
        assert!(matches!(load_csv(empty.path(), &["u"]), Err(Error::Parse { .. })));

        let bad = write_tmp("u,y\n1,2\n3,abc\n");
        match load_csv(bad.path(), &["u", "y"]) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (3, 2)),
            other => panic!("unexpected {other:?}"),
        }

        assert!(matches!(
            load_csv("/nonexistent/data.csv", &["u"]),
            Err(Error::FileNotFound(_))
        ));
    }

    #[test]
    fn csv_values_are_exact() {
        let vals: [f64; 4] = [0.1, 1.0 / 3.0, -2.5e-300, 123456.789];
        let text: String = std::iter::once("v\n".to_string())
            .chain(vals.iter().map(|v| format!("{v:?}\n")))
            .collect();
        let f = write_tmp(&text);
        let ts = load_csv(f.path(), &["v"]).unwrap();
        for (a, b) in ts.channel("v").unwrap().iter().zip(&vals) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn synthetic_series_are_deterministic() {
        let a = synth_narx(200, 7).unwrap();
        let b = synth_narx(200, 7).unwrap();
        let c = synth_narx(200, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 200);
        assert!(synth_narx(19, 1).is_err());
        let g = synth_gps(400, 1).unwrap();
        assert_eq!(g, synth_gps(400, 1).unwrap());
        assert_eq!(g.names().len(), 11);
    }
}
