//! Report assembly and the on-disk formats: JSON with 17 significant digits,
//! digit-frequency tables and per-term series as CSV.

use std::io;

use serde::{Deserialize, Serialize};

use crate::chains::{classify, stationary_distribution, ChainClassification, StochasticMatrix};
use crate::error::Error;
use crate::resonance::{verdict_from_eigen, ResonanceStatus, ResonanceVerdict, SearchBounds};
use crate::sequences::{
    all_component_series, all_component_verdicts, ComponentVerdict, LogSignificandSeries, SeriesKind,
};
use crate::significand::{benford_first_digit_probs, chi_squared, DigitFrequencyTable, LogValue};
use crate::spectral::{eigen_decompose, projectors_of_matrix, SpectralError};
use crate::Complex;

pub const SCHEMA: &str = "benford-chain/1";

/// JSON formatter printing every float as `d.dddddddddddddddde±x`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Serializes with [`Sig17`]; non-finite floats become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    value.serialize(&mut ser).expect("in-memory serialization");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes utf-8")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentReport {
    /// One-based row.
    pub i: usize,
    /// One-based column.
    pub j: usize,
    pub pn_minus_pstar: ComponentVerdict,
    pub successive_diff: ComponentVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalTable {
    pub kind: SeriesKind,
    pub n: u64,
    /// Labels in table order, `(i,j)`.
    pub columns: Vec<String>,
    pub frequencies: Vec<[f64; 9]>,
    pub chi_squared: Vec<f64>,
    pub zero_terms: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub schema: &'static str,
    pub matrix: Vec<Vec<f64>>,
    pub classification: ChainClassification,
    pub stationary: Vec<f64>,
    pub eigenvalues: Vec<Complex>,
    pub simple: Vec<bool>,
    pub resonance: ResonanceVerdict,
    pub components: Vec<ComponentReport>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub empirical: Vec<EmpiricalTable>,
    pub notes: Vec<String>,
}

impl AnalysisReport {
    /// 0 nonresonant, 2 resonant, 1 when the search could not decide.
    pub fn exit_code(&self) -> i32 {
        match self.resonance.status {
            ResonanceStatus::Nonresonant => 0,
            ResonanceStatus::Resonant => 2,
            ResonanceStatus::Undecided => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[derive(Default)]
pub struct AnalyzeOptions {
    pub bounds: SearchBounds,
    /// Terms for empirical tables of both kinds; `None` skips them.
    pub empirical_n: Option<u64>,
}


pub fn analyze(p: &StochasticMatrix, opts: AnalyzeOptions) -> Result<AnalysisReport, Error> {
    let classification = classify(p);
    classification.require_ergodic()?;
    let stationary = stationary_distribution(p)?.pi;
    let eig = eigen_decompose(p)?;
    let resonance = verdict_from_eigen(&eig, opts.bounds)?;
    let d = p.dim();
    let mut notes = Vec::new();
    if !classification.irreducible {
        notes.push("chain has transient states; the limit is still rank one".to_string());
    }

    let components = match projectors_of_matrix(&p.to_dmatrix(), &eig) {
        Ok(dec) => {
            let a = all_component_verdicts(&dec, &resonance, SeriesKind::PnMinusPstar);
            let b = all_component_verdicts(&dec, &resonance, SeriesKind::SuccessiveDiff);
            (0..d * d)
                .map(|k| ComponentReport { i: k / d + 1, j: k % d + 1, pn_minus_pstar: a[k], successive_diff: b[k] })
                .collect()
        }
        Err(SpectralError::MultipleEigenvalue { index, gap }) => {
            notes.push(format!(
                "eigenvalue {index} is not simple (gap {gap:.3e}); per-component verdicts need a simple spectrum"
            ));
            (0..d * d)
                .map(|k| ComponentReport {
                    i: k / d + 1,
                    j: k % d + 1,
                    pn_minus_pstar: ComponentVerdict::Undetermined,
                    successive_diff: ComponentVerdict::Undetermined,
                })
                .collect()
        }
        Err(e) => return Err(e.into()),
    };

    let mut empirical = Vec::new();
    if let Some(n) = opts.empirical_n {
        for kind in SeriesKind::BOTH {
            empirical.push(empirical_table(p, kind, n)?);
        }
    }

    Ok(AnalysisReport {
        schema: SCHEMA,
        matrix: p.rows(),
        classification,
        stationary,
        eigenvalues: eig.eigenvalues.clone(),
        simple: eig.simple.clone(),
        resonance,
        components,
        empirical,
        notes,
    })
}

/// Column order used by the printed tables: `(1,1), (2,1), …, (d,d)`.
pub fn table_order(d: usize) -> Vec<(usize, usize)> {
    (0..d).flat_map(|j| (0..d).map(move |i| (i, j))).collect()
}

pub fn component_label(i: usize, j: usize) -> String {
    format!("({},{})", i + 1, j + 1)
}

/// First-digit frequencies of every component, in table order.
pub fn empirical_table(p: &StochasticMatrix, kind: SeriesKind, n: u64) -> Result<EmpiricalTable, Error> {
    let series = all_component_series(p, kind, n)?;
    Ok(table_from_series(&series, p.dim(), kind, n))
}

pub fn table_from_series(series: &[LogSignificandSeries], d: usize, kind: SeriesKind, n: u64) -> EmpiricalTable {
    let order = table_order(d);
    let pick = |&(i, j): &(usize, usize)| &series[i * d + j];
    EmpiricalTable {
        kind,
        n,
        columns: order.iter().map(|&(i, j)| component_label(i, j)).collect(),
        frequencies: order.iter().map(|c| pick(c).digit_frequencies()).collect(),
        chi_squared: order
            .iter()
            .map(|c| chi_squared(&pick(c).digit_table()).unwrap_or(f64::INFINITY))
            .collect(),
        zero_terms: order.iter().map(|c| pick(c).zero_count()).collect(),
    }
}

/// Decimals the printed tables use for `n` terms: 3 up to 1000, then one per decade.
pub fn decimals_for(n: u64) -> usize {
    ((n.max(1) as f64).log10().ceil() as usize).max(3)
}

/// How frequencies are printed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Decimals(usize),
    /// Shortest string that parses back to the same `f64`.
    Full,
}

fn fmt_freq(x: f64, p: Precision) -> String {
    match p {
        Precision::Decimals(k) => format!("{x:.k$}"),
        Precision::Full => format!("{x}"),
    }
}

/// Nine digit rows, one column per entry of `columns`, then a Benford column
/// at 5 decimals.
pub fn frequency_csv(columns: &[(String, [f64; 9])], precision: Precision) -> String {
    let mut out = String::from("digit");
    for (label, _) in columns {
        if label.contains(',') {
            out.push_str(&format!(",\"{label}\""));
        } else {
            out.push_str(&format!(",{label}"));
        }
    }
    out.push_str(",benford\n");
    let benford = benford_first_digit_probs();
    for k in 0..9 {
        out.push_str(&(k + 1).to_string());
        for (_, f) in columns {
            out.push(',');
            out.push_str(&fmt_freq(f[k], precision));
        }
        let b = match precision {
            Precision::Full => format!("{}", benford[k]),
            Precision::Decimals(_) => format!("{:.5}", benford[k]),
        };
        out.push_str(&format!(",{b}\n"));
    }
    out
}

pub fn table_csv(t: &EmpiricalTable, precision: Precision) -> String {
    let cols: Vec<(String, [f64; 9])> = t.columns.iter().cloned().zip(t.frequencies.iter().copied()).collect();
    frequency_csv(&cols, precision)
}

pub fn digit_table_csv(label: &str, table: &DigitFrequencyTable, precision: Precision) -> String {
    frequency_csv(&[(label.to_string(), table.frequencies())], precision)
}

/// Parsed frequency table: labels without the digit and Benford columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyCsv {
    pub columns: Vec<String>,
    /// `rows[digit − 1][column]`.
    pub rows: Vec<Vec<f64>>,
    pub benford: Vec<f64>,
}

impl FrequencyCsv {
    pub fn column(&self, label: &str) -> Option<[f64; 9]> {
        let c = self.columns.iter().position(|l| l == label)?;
        let mut out = [0.0; 9];
        for (k, row) in self.rows.iter().enumerate() {
            out[k] = row[c];
        }
        Some(out)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CsvFormatError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected layout: {0}")]
    Layout(String),
    #[error("bad number {0:?}")]
    Number(String),
}

fn num(s: &str) -> Result<f64, CsvFormatError> {
    s.trim().parse().map_err(|_| CsvFormatError::Number(s.to_string()))
}

pub fn parse_frequency_csv(text: &str) -> Result<FrequencyCsv, CsvFormatError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() < 2 || header[0] != "digit" || header[header.len() - 1] != "benford" {
        return Err(CsvFormatError::Layout(format!("header {header:?}")));
    }
    let columns = header[1..header.len() - 1].to_vec();
    let mut rows = Vec::new();
    let mut benford = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() || rec[0].trim() != (k + 1).to_string() {
            return Err(CsvFormatError::Layout(format!("row {}", k + 1)));
        }
        rows.push(rec.iter().skip(1).take(columns.len()).map(num).collect::<Result<_, _>>()?);
        benford.push(num(&rec[rec.len() - 1])?);
    }
    if rows.len() != 9 {
        return Err(CsvFormatError::Layout(format!("{} digit rows", rows.len())));
    }
    Ok(FrequencyCsv { columns, rows, benford })
}

/// `log₁₀|x|` as an exact decimal string `k + m` without rounding `m` into `k`.
pub fn format_log_value(v: &LogValue) -> String {
    let (k, m) = (v.characteristic(), v.mantissa());
    let digits = |f: f64| {
        let s = format!("{f:.17}");
        s.trim_start_matches('0').to_string()
    };
    if k >= 0 || m == 0.0 || 1.0 - m >= 1.0 {
        format!("{}{}", k, digits(m))
    } else {
        // k + m = −((−k − 1) + (1 − m))
        format!("-{}{}", -(k + 1), digits(1.0 - m))
    }
}

pub fn parse_log_value(s: &str) -> Result<LogValue, CsvFormatError> {
    let s = s.trim();
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    let k: i64 = int.parse().map_err(|_| CsvFormatError::Number(s.to_string()))?;
    let m: f64 = if frac.is_empty() { 0.0 } else { num(&format!("0.{frac}"))? };
    Ok(if neg {
        LogValue::from_parts(-k - 1, 1.0 - m)
    } else {
        LogValue::from_parts(k, m)
    })
}

/// One row per term: `n, log10_abs, is_zero, significand, D1`.
pub fn series_csv(s: &LogSignificandSeries) -> String {
    let mut out = String::from("n,log10_abs,is_zero,significand,D1\n");
    for e in &s.entries {
        match &e.log10_abs {
            Some(v) => out.push_str(&format!(
                "{},{},false,{},{}\n",
                e.n,
                format_log_value(v),
                v.significand(),
                v.first_digit()
            )),
            None => out.push_str(&format!("{},,true,,0\n", e.n)),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SeriesRow {
    pub n: u64,
    pub log10_abs: Option<String>,
    pub is_zero: bool,
    pub significand: Option<f64>,
    #[serde(rename = "D1")]
    pub d1: u8,
}

pub fn parse_series_csv(text: &str) -> Result<Vec<SeriesRow>, CsvFormatError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows = rdr.deserialize().collect::<Result<Vec<SeriesRow>, _>>()?;
    for r in &rows {
        if let Some(l) = &r.log10_abs {
            parse_log_value(l)?;
        }
    }
    Ok(rows)
}
