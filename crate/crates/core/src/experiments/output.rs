//! Records CSV and JSON report files.
//!
//! A records file starts with two comment lines, `# version: ...` and
//! `# config: {...}`, followed by a header and one row per replicate:
//!
//! ```text
//! replicate,norm_gamma,in_regime,max_shift_cluster,max_shift,proj_dev_norm,
//! linear_norm,remainder_norm,overlap_sq,leakage_sq,
//! [overlap,b_tilde,naive_error,debiased_error,floor_active,linf_error,rho_theta,]
//! bilinear_<x>_<y>...,[linear_<x>...]
//! ```
//!
//! The bracketed columns are present only when the tracked cluster is
//! simple. Flags are written as `0`/`1`; floats use the shortest
//! representation that parses back to the same value.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::replicate::{EstimatorFields, RecordSchema, ReplicateRecord};
use super::summary::VERSION;
use crate::error::{Error, Result};

const BASE_COLUMNS: [&str; 10] = [
    "replicate",
    "norm_gamma",
    "in_regime",
    "max_shift_cluster",
    "max_shift",
    "proj_dev_norm",
    "linear_norm",
    "remainder_norm",
    "overlap_sq",
    "leakage_sq",
];

const ESTIMATOR_COLUMNS: [&str; 7] = [
    "overlap",
    "b_tilde",
    "naive_error",
    "debiased_error",
    "floor_active",
    "linf_error",
    "rho_theta",
];

pub fn header(schema: &RecordSchema) -> Vec<String> {
    let mut cols: Vec<String> = BASE_COLUMNS.iter().map(|s| s.to_string()).collect();
    if schema.estimator {
        cols.extend(ESTIMATOR_COLUMNS.iter().map(|s| s.to_string()));
    }
    cols.extend(schema.bilinear.iter().map(|p| format!("bilinear_{p}")));
    cols.extend(schema.linear_forms.iter().map(|p| format!("linear_{p}")));
    cols
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn records_to_csv(
    records: &[ReplicateRecord],
    schema: &RecordSchema,
    config: &ExperimentConfig,
) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "# version: {VERSION}").unwrap();
    writeln!(out, "# config: {}", config.to_json()).unwrap();
    out.push_str(&header(schema).join(","));
    out.push('\n');
    for r in records {
        if r.bilinear.len() != schema.bilinear.len()
            || r.linear_forms.len() != schema.linear_forms.len()
        {
            return Err(Error::dims(format!(
                "record {} does not match the schema",
                r.replicate
            )));
        }
        if r.estimator.is_some() != schema.estimator {
            return Err(Error::dims(format!(
                "record {} estimator columns do not match",
                r.replicate
            )));
        }
        write!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.replicate,
            r.norm_gamma,
            flag(r.in_regime),
            r.max_shift_cluster,
            r.max_shift,
            r.proj_dev_norm,
            r.linear_norm,
            r.remainder_norm,
            r.overlap_sq,
            r.leakage_sq
        )
        .unwrap();
        if let Some(e) = &r.estimator {
            write!(
                out,
                ",{},{},{},{},{},{},{}",
                e.overlap,
                e.b_tilde,
                e.naive_error,
                e.debiased_error,
                flag(e.floor_active),
                e.linf_error,
                e.rho_theta
            )
            .unwrap();
        }
        for v in r.bilinear.iter().chain(&r.linear_forms) {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// A parsed records file.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordsFile {
    pub version: String,
    pub config: ExperimentConfig,
    pub schema: RecordSchema,
    pub records: Vec<ReplicateRecord>,
}

pub fn records_from_csv(text: &str) -> Result<RecordsFile> {
    let parse_err = |line: usize, msg: String| Error::Parse(format!("line {line}: {msg}"));
    let mut lines = text.lines().enumerate();
    let mut version = None;
    let mut config = None;
    let header_line = loop {
        let (i, line) = lines
            .next()
            .ok_or_else(|| parse_err(0, "missing header".into()))?;
        if let Some(rest) = line.strip_prefix("# version:") {
            version = Some(rest.trim().to_string());
        } else if let Some(rest) = line.strip_prefix("# config:") {
            config = Some(ExperimentConfig::from_json(rest.trim())?);
        } else if !line.starts_with('#') {
            break (i + 1, line);
        }
    };
    let version = version.ok_or_else(|| parse_err(1, "missing version line".into()))?;
    let config = config.ok_or_else(|| parse_err(2, "missing config line".into()))?;

    let cols: Vec<&str> = header_line.1.split(',').map(str::trim).collect();
    if cols.len() < BASE_COLUMNS.len() || cols[..BASE_COLUMNS.len()] != BASE_COLUMNS {
        return Err(parse_err(header_line.0, "unexpected base columns".into()));
    }
    let mut at = BASE_COLUMNS.len();
    let estimator = cols.get(at) == Some(&ESTIMATOR_COLUMNS[0]);
    if estimator {
        if cols.len() < at + ESTIMATOR_COLUMNS.len()
            || cols[at..at + ESTIMATOR_COLUMNS.len()] != ESTIMATOR_COLUMNS
        {
            return Err(parse_err(
                header_line.0,
                "unexpected estimator columns".into(),
            ));
        }
        at += ESTIMATOR_COLUMNS.len();
    }
    let mut bilinear = Vec::new();
    let mut linear_forms = Vec::new();
    for c in &cols[at..] {
        if let Some(p) = c.strip_prefix("bilinear_") {
            if !linear_forms.is_empty() {
                return Err(parse_err(
                    header_line.0,
                    "bilinear column after linear columns".into(),
                ));
            }
            bilinear.push(p.to_string());
        } else if let Some(p) = c.strip_prefix("linear_") {
            linear_forms.push(p.to_string());
        } else {
            return Err(parse_err(header_line.0, format!("unknown column {c:?}")));
        }
    }
    let schema = RecordSchema {
        bilinear,
        linear_forms,
        estimator,
    };

    let mut records = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(parse_err(
                line_no,
                format!("expected {} fields, got {}", cols.len(), fields.len()),
            ));
        }
        let num = |j: usize| -> Result<f64> {
            let v: f64 = fields[j].parse().map_err(|_| {
                parse_err(
                    line_no,
                    format!("bad number {:?} in column {}", fields[j], cols[j]),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite);
            }
            Ok(v)
        };
        let boolean = |j: usize| -> Result<bool> {
            match fields[j] {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(parse_err(
                    line_no,
                    format!("bad flag {other:?} in column {}", cols[j]),
                )),
            }
        };
        let replicate: u64 = fields[0]
            .parse()
            .map_err(|_| parse_err(line_no, format!("bad replicate index {:?}", fields[0])))?;
        let mut j = BASE_COLUMNS.len();
        let est = if estimator {
            let e = EstimatorFields {
                overlap: num(j)?,
                b_tilde: num(j + 1)?,
                naive_error: num(j + 2)?,
                debiased_error: num(j + 3)?,
                floor_active: boolean(j + 4)?,
                linf_error: num(j + 5)?,
                rho_theta: num(j + 6)?,
            };
            j += ESTIMATOR_COLUMNS.len();
            Some(e)
        } else {
            None
        };
        let nb = schema.bilinear.len();
        let bilinear = (j..j + nb).map(num).collect::<Result<Vec<_>>>()?;
        let linear_forms = (j + nb..cols.len()).map(num).collect::<Result<Vec<_>>>()?;
        records.push(ReplicateRecord {
            replicate,
            norm_gamma: num(1)?,
            in_regime: boolean(2)?,
            max_shift_cluster: num(3)?,
            max_shift: num(4)?,
            proj_dev_norm: num(5)?,
            linear_norm: num(6)?,
            remainder_norm: num(7)?,
            overlap_sq: num(8)?,
            leakage_sq: num(9)?,
            estimator: est,
            bilinear,
            linear_forms,
        });
    }
    Ok(RecordsFile {
        version,
        config,
        schema,
        records,
    })
}

pub fn write_records(
    path: &Path,
    records: &[ReplicateRecord],
    schema: &RecordSchema,
    config: &ExperimentConfig,
) -> Result<()> {
    fs::write(path, records_to_csv(records, schema, config)?)?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<RecordsFile> {
    records_from_csv(&fs::read_to_string(path)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(estimator: bool) -> RecordSchema {
        RecordSchema {
            bilinear: vec!["e1_e1".into(), "r1x_r1y".into()],
            linear_forms: if estimator {
                vec!["e1".into()]
            } else {
                Vec::new()
            },
            estimator,
        }
    }

    fn record(i: u64, estimator: bool) -> ReplicateRecord {
        let x = 0.1 + i as f64 / 3.0;
        ReplicateRecord {
            replicate: i,
            norm_gamma: x,
            in_regime: i.is_multiple_of(2),
            max_shift_cluster: x / 7.0,
            max_shift: 1e-300 * x,
            proj_dev_norm: std::f64::consts::PI * x,
            linear_norm: -x,
            remainder_norm: 1.0 / 3.0,
            overlap_sq: 0.9,
            leakage_sq: 2.5e-17,
            estimator: estimator.then_some(EstimatorFields {
                overlap: 0.95,
                b_tilde: -0.1 / 3.0,
                naive_error: -0.05,
                debiased_error: 1e-9,
                floor_active: i == 1,
                linf_error: 0.2,
                rho_theta: -1e-3,
            }),
            bilinear: vec![x * x, -x],
            linear_forms: if estimator {
                vec![x.sqrt()]
            } else {
                Vec::new()
            },
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let cfg = ExperimentConfig::new(4, 3, 0.1, vec![2.0], 10, 3);
        for est in [true, false] {
            let recs: Vec<_> = (0..4).map(|i| record(i, est)).collect();
            let text = records_to_csv(&recs, &schema(est), &cfg).unwrap();
            let back = records_from_csv(&text).unwrap();
            assert_eq!(back.records, recs);
            assert_eq!(back.schema, schema(est));
            assert_eq!(back.config, cfg);
            assert_eq!(back.version, VERSION);
        }
    }

    #[test]
    fn empty_list_is_header_only() {
        let cfg = ExperimentConfig::new(4, 3, 0.1, vec![2.0], 10, 3);
        let text = records_to_csv(&[], &schema(true), &cfg).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(records_from_csv(&text).unwrap().records.is_empty());
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let cfg = ExperimentConfig::new(4, 3, 0.1, vec![2.0], 10, 3);
        let text = records_to_csv(&[record(0, false)], &schema(false), &cfg).unwrap();
        let short = text.trim_end().rsplit_once(',').unwrap().0.to_string();
        assert!(matches!(records_from_csv(&short), Err(Error::Parse(_))));
        let nan = text.replace(",0.9,", ",NaN,");
        assert!(records_from_csv(&nan).is_err());
        assert!(records_from_csv("replicate\n").is_err());
    }
}
