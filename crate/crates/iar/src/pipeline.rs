//! CSV ingestion and preprocessing for real series: lowess trend removal
//! followed by standardization, producing a `TimeSeries` ready for fitting.

use std::path::Path;

use crate::error::{IarError, Result};
use crate::model::{sample_std, TimeSeries};

/// Column names expected in an input CSV.
#[derive(Clone, Debug)]
pub struct CsvSchema {
    pub time: String,
    pub value: String,
    pub err_sd: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema { time: "time".into(), value: "value".into(), err_sd: "err_sd".into() }
    }
}

/// A parsed, time-sorted raw series prior to preprocessing.
#[derive(Clone, Debug, PartialEq)]
pub struct RawSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub err_sd: Option<Vec<f64>>,
}

/// Reads `time,value[,err_sd]` rows, sorts by time and rejects duplicates.
pub fn read_csv(path: &Path, schema: &CsvSchema) -> Result<RawSeries> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let time_col = col(&schema.time).ok_or_else(|| IarError::MissingColumn(schema.time.clone()))?;
    let value_col =
        col(&schema.value).ok_or_else(|| IarError::MissingColumn(schema.value.clone()))?;
    let err_col = col(&schema.err_sd);

    let parse = |record: &csv::StringRecord, idx: usize, row: usize| -> Result<f64> {
        let field = record.get(idx).unwrap_or("");
        field
            .trim()
            .parse::<f64>()
            .map_err(|_| IarError::ParseRow { row, field: field.to_string() })
    };

    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 2; // header is row 1
        let t = parse(&record, time_col, row)?;
        let v = parse(&record, value_col, row)?;
        let e = match err_col {
            Some(idx) if record.get(idx).map_or(false, |f| !f.trim().is_empty()) => {
                parse(&record, idx, row)?
            }
            _ => 0.0,
        };
        rows.push((t, v, e));
    }
    if rows.is_empty() {
        return Err(IarError::DegenerateData("CSV contains no data rows".into()));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in rows.windows(2) {
        if w[1].0 == w[0].0 {
            return Err(IarError::DuplicateTimestamp { time: w[0].0 });
        }
    }
    let times: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let values: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let err_sd = if err_col.is_some() { Some(rows.iter().map(|r| r.2).collect()) } else { None };
    Ok(RawSeries { times, values, err_sd })
}

/// Writes a series back out in the same schema, with optional extra columns.
pub fn write_csv(
    path: &Path,
    times: &[f64],
    values: &[f64],
    err_sd: Option<&[f64]>,
    extra: &[(&str, &[f64])],
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["time".to_string(), "value".to_string()];
    if err_sd.is_some() {
        header.push("err_sd".to_string());
    }
    for (name, _) in extra {
        header.push((*name).to_string());
    }
    writer.write_record(&header)?;
    for i in 0..times.len() {
        let mut record = vec![times[i].to_string(), values[i].to_string()];
        if let Some(e) = err_sd {
            record.push(e[i].to_string());
        }
        for (_, column) in extra {
            record.push(column[i].to_string());
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

/// Locally weighted linear regression with tricube weights over the
/// `ceil(span * n)` nearest neighbors in time, with `robust_iters`
/// bisquare reweighting passes.
pub fn lowess_trend(
    times: &[f64],
    values: &[f64],
    span: f64,
    robust_iters: usize,
) -> Result<Vec<f64>> {
    let n = times.len();
    if n < 3 || values.len() != n {
        return Err(IarError::invalid("lowess: need n >= 3 with equal lengths"));
    }
    if !(0.0 < span && span <= 1.0) {
        return Err(IarError::invalid(format!("lowess: span must lie in (0,1], got {span}")));
    }
    let k = (span * n as f64).ceil() as usize;
    if k < 2 {
        return Err(IarError::invalid(format!(
            "lowess: span {span} selects fewer than 2 of {n} points"
        )));
    }
    let k = k.min(n);

    let mut robustness = vec![1.0; n];
    let mut fitted = vec![0.0; n];
    for iteration in 0..=robust_iters {
        for i in 0..n {
            let (lo, hi) = neighbor_window(times, i, k);
            fitted[i] = local_linear_fit(times, values, &robustness, lo, hi, times[i]);
        }
        if iteration == robust_iters {
            break;
        }
        // bisquare reweighting against the current residuals
        let mut abs_res: Vec<f64> =
            values.iter().zip(&fitted).map(|(y, f)| (y - f).abs()).collect();
        abs_res.sort_by(|a, b| a.total_cmp(b));
        let median = abs_res[n / 2];
        if median <= 0.0 {
            break; // exact fit, nothing to downweight
        }
        for i in 0..n {
            let u = (values[i] - fitted[i]) / (6.0 * median);
            robustness[i] = if u.abs() >= 1.0 { 0.0 } else { (1.0 - u * u) * (1.0 - u * u) };
        }
    }
    Ok(fitted)
}

/// Index range (inclusive lo, exclusive hi) of the `k` nearest neighbors of
/// `times[i]` in the sorted times.
fn neighbor_window(times: &[f64], i: usize, k: usize) -> (usize, usize) {
    let n = times.len();
    let mut lo = i.saturating_sub(k - 1).min(n - k);
    let mut hi = lo + k;
    // slide the window while the excluded left point is farther than the
    // candidate right point
    while hi < n && lo < i {
        if times[i] - times[lo] > times[hi] - times[i] {
            lo += 1;
            hi += 1;
        } else {
            break;
        }
    }
    while lo > 0 && hi > i + 1 {
        if times[hi - 1] - times[i] > times[i] - times[lo - 1] {
            lo -= 1;
            hi -= 1;
        } else {
            break;
        }
    }
    (lo, hi)
}

fn local_linear_fit(
    times: &[f64],
    values: &[f64],
    robustness: &[f64],
    lo: usize,
    hi: usize,
    x0: f64,
) -> f64 {
    let dmax = times[lo..hi].iter().map(|t| (t - x0).abs()).fold(0.0, f64::max);
    let mut sw = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for j in lo..hi {
        let d = (times[j] - x0).abs();
        let tri = if dmax > 0.0 {
            let u = d / dmax;
            let c = 1.0 - u * u * u;
            c * c * c
        } else {
            1.0
        };
        let w = tri * robustness[j];
        let x = times[j] - x0;
        sw += w;
        sx += w * x;
        sy += w * values[j];
        sxx += w * x * x;
        sxy += w * x * values[j];
    }
    if sw <= 0.0 {
        // all neighbors downweighted to zero; fall back to the raw value
        return values[(lo + hi) / 2];
    }
    let denom = sxx - sx * sx / sw;
    if denom.abs() < 1e-12 * (sxx.abs() + 1e-300) {
        return sy / sw;
    }
    let slope = (sxy - sx * sy / sw) / denom;
    let intercept = (sy - slope * sx) / sw;
    intercept // evaluated at x = x0 (centered coordinates)
}

/// Detrends with lowess, then standardizes to zero mean and unit sample
/// variance; measurement-error standard deviations are rescaled accordingly
/// and squared into variances.
pub fn preprocess(raw: &RawSeries, span: f64, robust_iters: usize) -> Result<TimeSeries> {
    if raw.times.len() < 3 {
        return Err(IarError::invalid("preprocess: need at least 3 observations"));
    }
    let trend = lowess_trend(&raw.times, &raw.values, span, robust_iters)?;
    let detrended: Vec<f64> =
        raw.values.iter().zip(&trend).map(|(y, t)| y - t).collect();
    let scale = sample_std(&detrended);
    if scale <= 0.0 {
        return Err(IarError::DegenerateData(
            "series has zero variance after detrending".into(),
        ));
    }
    let mean = detrended.iter().sum::<f64>() / detrended.len() as f64;
    let standardized: Vec<f64> = detrended.iter().map(|v| (v - mean) / scale).collect();
    let meas_err_var = raw
        .err_sd
        .as_ref()
        .map(|sds| sds.iter().map(|sd| (sd / scale) * (sd / scale)).collect());
    TimeSeries::new(raw.times.clone(), standardized, meas_err_var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn read_csv_well_formed() {
        let f = write_temp("time,value\n1.0,2.5\n2.0,3.5\n3.0,1.5\n");
        let raw = read_csv(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!(raw.times, vec![1.0, 2.0, 3.0]);
        assert_eq!(raw.values, vec![2.5, 3.5, 1.5]);
        assert!(raw.err_sd.is_none());
    }

    #[test]
    fn read_csv_sorts_by_time() {
        let f = write_temp("time,value\n3.0,30\n1.0,10\n2.0,20\n");
        let raw = read_csv(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!(raw.times, vec![1.0, 2.0, 3.0]);
        assert_eq!(raw.values, vec![10.0, 20.0, 30.0]);
    }

    #[test]
    fn read_csv_names_duplicate_time() {
        let f = write_temp("time,value\n1.0,1\n5.0,2\n5.0,3\n");
        let err = read_csv(f.path(), &CsvSchema::default()).unwrap_err();
        assert!(err.to_string().contains('5'), "{err}");
    }

    #[test]
    fn read_csv_reports_row_of_bad_cell() {
        let f = write_temp("time,value\n1.0,1\n2.0,oops\n");
        let err = read_csv(f.path(), &CsvSchema::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 3") && msg.contains("oops"), "{msg}");
    }

    #[test]
    fn read_csv_missing_column() {
        let f = write_temp("t,v\n1.0,1\n");
        let err = read_csv(f.path(), &CsvSchema::default()).unwrap_err();
        assert!(matches!(err, IarError::MissingColumn(_)));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let times: Vec<f64> = (0..50).map(|i| i as f64 + rng.gen::<f64>() * 0.5).collect();
        let values: Vec<f64> = (0..50).map(|_| rng.gen::<f64>() * 200.0 - 100.0).collect();
        let err_sd: Vec<f64> = (0..50).map(|_| rng.gen::<f64>()).collect();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv(f.path(), &times, &values, Some(&err_sd), &[]).unwrap();
        let raw = read_csv(f.path(), &CsvSchema::default()).unwrap();
        assert_eq!(raw.times, times);
        assert_eq!(raw.values, values);
        assert_eq!(raw.err_sd.unwrap(), err_sd);
    }

    #[test]
    fn lowess_reproduces_a_constant() {
        let times: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let values = vec![4.2; 20];
        let trend = lowess_trend(&times, &values, 0.5, 0).unwrap();
        for t in trend {
            assert_relative_eq!(t, 4.2, epsilon = 1e-10);
        }
    }

    #[test]
    fn lowess_is_exact_on_linear_data() {
        let times: Vec<f64> = (0..30).map(|i| 0.3 * i as f64).collect();
        let values: Vec<f64> = times.iter().map(|t| 2.0 * t - 1.0).collect();
        let trend = lowess_trend(&times, &values, 1.0, 0).unwrap();
        for (t, v) in trend.iter().zip(&values) {
            assert_relative_eq!(t, v, epsilon = 1e-8);
        }
    }

    #[test]
    fn lowess_shift_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let times: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let values: Vec<f64> = times.iter().map(|t| (t * 0.3).sin() + rng.gen::<f64>()).collect();
        let shifted: Vec<f64> = values.iter().map(|v| v + 17.0).collect();
        let a = lowess_trend(&times, &values, 2.0 / 3.0, 3).unwrap();
        let b = lowess_trend(&times, &shifted, 2.0 / 3.0, 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x + 17.0, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn lowess_residual_mean_near_zero_on_sine_plus_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 500;
        let times: Vec<f64> = (0..n).map(|i| i as f64 * 0.05).collect();
        let values: Vec<f64> =
            times.iter().map(|t| t.sin() + 0.3 * (rng.gen::<f64>() - 0.5)).collect();
        let trend = lowess_trend(&times, &values, 2.0 / 3.0, 0).unwrap();
        let mean_res: f64 =
            values.iter().zip(&trend).map(|(y, t)| y - t).sum::<f64>() / n as f64;
        assert!(mean_res.abs() < 0.05, "residual mean {mean_res}");
    }

    #[test]
    fn lowess_rejects_tiny_span() {
        let times: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let values = times.clone();
        assert!(lowess_trend(&times, &values, 0.005, 0).is_err());
        assert!(lowess_trend(&times, &values, 1.5, 0).is_err());
    }

    #[test]
    fn preprocess_standardizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let times: Vec<f64> = (0..200).map(|i| i as f64).collect();
        let values: Vec<f64> =
            times.iter().map(|t| 0.01 * t + rng.gen::<f64>() * 3.0).collect();
        let raw = RawSeries { times, values, err_sd: None };
        let out = preprocess(&raw, 2.0 / 3.0, 3).unwrap();
        let n = out.len() as f64;
        let mean = out.values().iter().sum::<f64>() / n;
        let var =
            out.values().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 1e-10, "mean {mean}");
        assert!((var - 1.0).abs() < 1e-10, "variance {var}");
    }

    #[test]
    fn preprocess_near_identity_on_standardized_trendless_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 300;
        let times: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let mut values: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        // standardize by hand
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = sample_std(&values);
        for v in &mut values {
            *v = (*v - mean) / sd;
        }
        let raw = RawSeries { times, values: values.clone(), err_sd: None };
        let out = preprocess(&raw, 1.0, 0).unwrap();
        let rms: f64 = (out
            .values()
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n as f64)
            .sqrt();
        assert!(rms < 0.1, "rms change {rms}");
    }

    #[test]
    fn preprocess_rejects_constant_input() {
        let raw = RawSeries {
            times: (0..10).map(|i| i as f64).collect(),
            values: vec![1.0; 10],
            err_sd: None,
        };
        assert!(matches!(preprocess(&raw, 0.5, 0), Err(IarError::DegenerateData(_))));
    }
}
