//! CSV interchange formats.
//!
//! | file       | header                                   | comment lines                              |
//! |------------|------------------------------------------|--------------------------------------------|
//! | state      | `twice_l1,twice_l2,re,im`                |                                            |
//! | mixture    | `twice_l1,twice_l2,weight`               |                                            |
//! | scan       | `x2_m,singles,coincidences`              | `fixed_slit`, `twice_l`, `seed`, `acquisition_s`, `mean_pair_flux` |
//! | histogram  | `twice_l1,twice_l2,probability,std_err`  |                                            |
//! | map        | `x1_m,x2_m,rate`                         |                                            |
//! | slice      | `x1_m,rate`                              | `x2_m`, `visibility`                       |
//! | report     | `metric,value`                           |                                            |
//!
//! Comment lines start with `# key=value` and precede the header. Slit labels
//! are written as `twice_l = 2 l`. Floats use the shortest representation
//! that round-trips, so output is byte-stable.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::diagnostics::DiagnosticsReport;
use crate::error::{Error, Result};
use crate::experiment::{ProbabilityTable, ScanRecord};
use crate::far_field::{CoincidenceMap, FringeSlice, Provenance};
use crate::geometry::SlitIndex;
use crate::state_prep::{CorrelatedMixture, QuditPureState};

/// Amplitudes at or below this magnitude are not written.
pub const AMPLITUDE_CUTOFF: f64 = 1e-12;

pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e6).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn state_csv(state: &QuditPureState) -> String {
    let mut out = String::from("twice_l1,twice_l2,re,im\n");
    for (l1, l2, c) in state.entries() {
        if c.norm() > AMPLITUDE_CUTOFF {
            let _ = writeln!(out, "{},{},{},{}", l1.twice_l(), l2.twice_l(), fmt_f64(c.re), fmt_f64(c.im));
        }
    }
    out
}

pub fn mixture_csv(mixture: &CorrelatedMixture) -> String {
    let d = mixture.dimension();
    let mut out = String::from("twice_l1,twice_l2,weight\n");
    for (slot, w) in mixture.weights().iter().enumerate() {
        let l = SlitIndex::from_slot(slot, d);
        let _ = writeln!(out, "{},{},{}", l.twice_l(), l.mirrored().twice_l(), fmt_f64(*w));
    }
    out
}

pub fn scan_csv(record: &ScanRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# fixed_slit={}", record.fixed_slit);
    let _ = writeln!(out, "# twice_l={}", record.fixed_slit.twice_l());
    let _ = writeln!(out, "# seed={}", record.seed);
    let _ = writeln!(out, "# acquisition_s={}", fmt_f64(record.acquisition));
    let _ = writeln!(out, "# mean_pair_flux={}", fmt_f64(record.mean_pair_flux));
    out.push_str("x2_m,singles,coincidences\n");
    for ((x, s), c) in record.positions.iter().zip(&record.singles).zip(&record.coincidences) {
        let _ = writeln!(out, "{},{s},{c}", fmt_f64(*x));
    }
    out
}

pub fn histogram_csv(table: &ProbabilityTable) -> String {
    let d = table.dimension();
    let mut out = String::from("twice_l1,twice_l2,probability,std_err\n");
    for i in 0..d {
        for j in 0..d {
            let (l1, l2) = (SlitIndex::from_slot(i, d), SlitIndex::from_slot(j, d));
            let _ = writeln!(
                out,
                "{},{},{},{}",
                l1.twice_l(),
                l2.twice_l(),
                fmt_f64(table.get(l1, l2)),
                fmt_f64(table.std_error(l1, l2))
            );
        }
    }
    out
}

pub fn map_csv(map: &CoincidenceMap) -> String {
    let mut out = String::from("x1_m,x2_m,rate\n");
    for (i2, x2) in map.x2.iter().enumerate() {
        for (i1, x1) in map.x1.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", fmt_f64(*x1), fmt_f64(*x2), fmt_f64(map.rate(i1, i2)));
        }
    }
    out
}

pub fn slice_csv(slice: &FringeSlice) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# x2_m={}", fmt_f64(slice.x2));
    let _ = writeln!(out, "# visibility={}", fmt_f64(slice.visibility));
    let _ = writeln!(out, "# source={}", slice.provenance);
    out.push_str("x1_m,rate\n");
    for (x, r) in slice.x1.iter().zip(&slice.rates) {
        let _ = writeln!(out, "{},{}", fmt_f64(*x), fmt_f64(*r));
    }
    out
}

pub fn report_csv(report: &DiagnosticsReport) -> String {
    let mut out = String::from("metric,value\n");
    for (m, v) in &report.entries {
        let _ = writeln!(out, "{m},{v}");
    }
    out
}

pub fn report_text(report: &DiagnosticsReport) -> String {
    let width = report.entries.iter().map(|(m, _)| m.len()).max().unwrap_or(0);
    report.entries.iter().map(|(m, v)| format!("{m:<width$}  {v}\n")).collect()
}

/// Comment metadata and data rows of one CSV document.
#[derive(Debug, Clone, Default)]
pub struct CsvDocument {
    pub meta: BTreeMap<String, String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn parse_csv(text: &str, source: &str) -> Result<CsvDocument> {
    let perr = |message: String| Error::Parse { path: source.to_string(), message };
    let mut meta = BTreeMap::new();
    let mut body = String::new();
    for line in text.lines() {
        if let Some(comment) = line.trim_start().strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        } else if !line.trim().is_empty() {
            body.push_str(line);
            body.push('\n');
        }
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let header = reader.headers().map_err(|e| perr(e.to_string()))?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        rows.push(rec.map_err(|e| perr(e.to_string()))?.iter().map(String::from).collect());
    }
    Ok(CsvDocument { meta, header, rows })
}

impl CsvDocument {
    fn expect_header(&self, expected: &[&str], source: &str) -> Result<()> {
        if self.header != expected {
            return Err(Error::Parse {
                path: source.to_string(),
                message: format!("expected header {:?}, found {:?}", expected.join(","), self.header.join(",")),
            });
        }
        Ok(())
    }
}

fn field<T: std::str::FromStr>(row: &[String], i: usize, source: &str, line: usize) -> Result<T> {
    row.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| Error::Parse {
        path: source.to_string(),
        message: format!("row {line}: cannot parse column {}", i + 1),
    })
}

fn slit(twice_l: i32, dimension: usize, source: &str) -> Result<SlitIndex> {
    SlitIndex::new(twice_l, dimension).map_err(|e| Error::Parse { path: source.to_string(), message: e.to_string() })
}

/// Read a state file for a `dimension`-slit aperture; missing entries are zero.
pub fn parse_state(text: &str, dimension: usize, source: &str) -> Result<QuditPureState> {
    let doc = parse_csv(text, source)?;
    doc.expect_header(&["twice_l1", "twice_l2", "re", "im"], source)?;
    let mut amps = vec![Complex64::new(0.0, 0.0); dimension * dimension];
    for (n, row) in doc.rows.iter().enumerate() {
        let l1 = slit(field(row, 0, source, n + 1)?, dimension, source)?;
        let l2 = slit(field(row, 1, source, n + 1)?, dimension, source)?;
        amps[l1.slot(dimension) * dimension + l2.slot(dimension)] =
            Complex64::new(field(row, 2, source, n + 1)?, field(row, 3, source, n + 1)?);
    }
    QuditPureState::from_raw(dimension, amps)
}

pub fn parse_mixture(text: &str, dimension: usize, source: &str) -> Result<CorrelatedMixture> {
    let doc = parse_csv(text, source)?;
    doc.expect_header(&["twice_l1", "twice_l2", "weight"], source)?;
    let mut weights = vec![0.0; dimension];
    for (n, row) in doc.rows.iter().enumerate() {
        let l1 = slit(field(row, 0, source, n + 1)?, dimension, source)?;
        let l2 = slit(field(row, 1, source, n + 1)?, dimension, source)?;
        if l2 != l1.mirrored() {
            return Err(Error::Parse { path: source.into(), message: format!("row {}: mixture terms must pair l with -l", n + 1) });
        }
        weights[l1.slot(dimension)] = field(row, 2, source, n + 1)?;
    }
    CorrelatedMixture::new(weights)
}

pub fn parse_scan(text: &str, dimension: usize, source: &str) -> Result<ScanRecord> {
    let doc = parse_csv(text, source)?;
    doc.expect_header(&["x2_m", "singles", "coincidences"], source)?;
    let meta = |key: &str| {
        doc.meta.get(key).ok_or_else(|| Error::Parse { path: source.into(), message: format!("missing comment `# {key}=`") })
    };
    let bad = |key: &str| Error::Parse { path: source.into(), message: format!("bad value for `{key}`") };
    let twice_l: i32 = meta("twice_l")?.parse().map_err(|_| bad("twice_l"))?;
    let mut record = ScanRecord {
        fixed_slit: slit(twice_l, dimension, source)?,
        positions: Vec::new(),
        singles: Vec::new(),
        coincidences: Vec::new(),
        expected_singles: Vec::new(),
        expected_coincidences: Vec::new(),
        acquisition: meta("acquisition_s")?.parse().map_err(|_| bad("acquisition_s"))?,
        seed: meta("seed")?.parse().map_err(|_| bad("seed"))?,
        mean_pair_flux: meta("mean_pair_flux")?.parse().map_err(|_| bad("mean_pair_flux"))?,
        covers_aperture: true,
    };
    for (n, row) in doc.rows.iter().enumerate() {
        record.positions.push(field(row, 0, source, n + 1)?);
        record.singles.push(field(row, 1, source, n + 1)?);
        record.coincidences.push(field(row, 2, source, n + 1)?);
    }
    // Files carry no expectations; sampled counts stand in for them.
    record.expected_singles = record.singles.iter().map(|&c| c as f64).collect();
    record.expected_coincidences = record.coincidences.iter().map(|&c| c as f64).collect();
    Ok(record)
}

/// Read a histogram. Entries are taken as given and may be unnormalized.
pub fn parse_histogram(text: &str, dimension: usize, source: &str) -> Result<ProbabilityTable> {
    let doc = parse_csv(text, source)?;
    doc.expect_header(&["twice_l1", "twice_l2", "probability", "std_err"], source)?;
    let n = dimension * dimension;
    let (mut p, mut e) = (vec![0.0; n], vec![0.0; n]);
    for (k, row) in doc.rows.iter().enumerate() {
        let l1 = slit(field(row, 0, source, k + 1)?, dimension, source)?;
        let l2 = slit(field(row, 1, source, k + 1)?, dimension, source)?;
        let idx = l1.slot(dimension) * dimension + l2.slot(dimension);
        p[idx] = field(row, 2, source, k + 1)?;
        e[idx] = field(row, 3, source, k + 1)?;
    }
    ProbabilityTable::from_raw(dimension, p, e).map_err(|err| Error::Parse { path: source.into(), message: err.to_string() })
}

pub fn parse_slice(text: &str, source: &str) -> Result<FringeSlice> {
    let doc = parse_csv(text, source)?;
    doc.expect_header(&["x1_m", "rate"], source)?;
    let get = |key: &str| -> Result<f64> {
        doc.meta
            .get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::Parse { path: source.into(), message: format!("missing or bad `# {key}=`") })
    };
    let provenance = match doc.meta.get("source").map(String::as_str) {
        Some("classically_correlated") => Provenance::ClassicallyCorrelated,
        Some("mixed") => Provenance::Mixed,
        _ => Provenance::Entangled,
    };
    let mut slice = FringeSlice { x2: get("x2_m")?, x1: Vec::new(), rates: Vec::new(), visibility: get("visibility")?, provenance };
    for (n, row) in doc.rows.iter().enumerate() {
        slice.x1.push(field(row, 0, source, n + 1)?);
        slice.rates.push(field(row, 1, source, n + 1)?);
    }
    Ok(slice)
}

pub fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Parse { path: path.display().to_string(), message: e.to_string() })
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::{near_field_scan, NoiseSettings};
    use crate::geometry::ExperimentGeometry;
    use crate::state_prep::{classically_correlated_state, ideal_entangled_state};
    use proptest::prelude::*;

    #[test]
    fn ideal_state_file_has_d_rows() {
        let g = ExperimentGeometry::reference();
        let text = state_csv(&ideal_entangled_state(&g));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "twice_l1,twice_l2,re,im");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("-3,3,"));
    }

    #[test]
    fn mixture_round_trip() {
        let g = ExperimentGeometry::reference();
        let m = classically_correlated_state(&g);
        let text = mixture_csv(&m);
        assert!(text.contains("-3,3,0.25\n"));
        assert_eq!(parse_mixture(&text, 4, "m").unwrap(), m);
    }

    #[test]
    fn scan_round_trip() {
        let g = ExperimentGeometry::reference();
        let psi = ideal_entangled_state(&g);
        let grid = crate::experiment::default_scan_grid(&g, 1e-5);
        let rec = near_field_scan(&psi, g.slits()[1], &grid, &NoiseSettings::default(), &g).unwrap();
        let text = scan_csv(&rec);
        assert!(text.starts_with("# fixed_slit=-1/2\n# twice_l=-1\n"));
        let back = parse_scan(&text, 4, "s").unwrap();
        assert_eq!(back.fixed_slit, rec.fixed_slit);
        assert_eq!(back.positions, rec.positions);
        assert_eq!(back.coincidences, rec.coincidences);
        assert_eq!(back.seed, rec.seed);
    }

    #[test]
    fn parse_errors_name_the_source() {
        let err = parse_state("a,b\n1,2\n", 4, "bad.csv").unwrap_err();
        assert!(err.to_string().starts_with("bad.csv:"), "{err}");
        let err = parse_state("twice_l1,twice_l2,re,im\n2,2,1,0\n", 4, "odd.csv").unwrap_err();
        assert!(err.to_string().contains("odd.csv"));
        assert!(parse_scan("x2_m,singles,coincidences\n0,1,1\n", 4, "s").is_err());
    }

    proptest! {
        #[test]
        fn state_files_round_trip(re in proptest::collection::vec(-1.0f64..1.0, 16), im in proptest::collection::vec(-1.0f64..1.0, 16)) {
            let amps: Vec<Complex64> = re.iter().zip(&im).map(|(a, b)| Complex64::new(*a, *b)).collect();
            let state = QuditPureState::from_raw(4, amps).unwrap();
            let back = parse_state(&state_csv(&state), 4, "p").unwrap();
            for (a, b) in state.amplitudes().iter().zip(back.amplitudes()) {
                if a.norm() > AMPLITUDE_CUTOFF {
                    prop_assert_eq!(a, b);
                } else {
                    prop_assert_eq!(*b, Complex64::new(0.0, 0.0));
                }
            }
        }

        #[test]
        fn float_format_round_trips(v in proptest::num::f64::NORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
