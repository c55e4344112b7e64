//! Options-chain CSV ingestion, the quote-level correlation matrix, and
//! train/validation splitting.
//!
//! The interchange format is a UTF-8 CSV with the canonical header in
//! [`CANONICAL_HEADER`]: one row per contract quote with identifiers,
//! market prices and sizes, activity counts, Greeks and implied
//! volatility. Columns may appear in any order and unknown columns are
//! ignored on read; [`write_quotes`] always emits the canonical order.
//! Greeks and implied volatility may be empty (missing); price, size and
//! count fields are required. Rows that fail to parse or violate quote
//! invariants are excluded from the table and reported row-by-row in
//! [`QuoteTable::diagnostics`] - nothing is coerced silently.

use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::market::OptionKind;

/// Column order of the interchange CSV format.
pub const CANONICAL_HEADER: &str = "contract,underlying,expiration,type,strike,style,bid,\
bid_size,ask,ask_size,volume,open_interest,quote_date,delta,gamma,theta,vega,implied_volatility";

/// Names of the numeric columns, in canonical order; these are the columns
/// eligible for correlation analysis.
pub const NUMERIC_COLUMNS: [&str; 12] = [
    "strike",
    "bid",
    "bid_size",
    "ask",
    "ask_size",
    "volume",
    "open_interest",
    "delta",
    "gamma",
    "theta",
    "vega",
    "implied_volatility",
];

/// Errors from parsing, validation and table operations. Row numbers are
/// 1-based data-row indices (the header is row 0).
#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column '{0}'")]
    MissingColumn(String),
    #[error("row {row}: column '{column}' has unparseable value '{value}'")]
    TypeError { row: usize, column: String, value: String },
    #[error("row {row}: bid {bid} exceeds ask {ask}")]
    CrossedMarket { row: usize, bid: f64, ask: f64 },
    #[error("row {row}: column '{column}' value {value} violates quote invariants")]
    OutOfRange { row: usize, column: String, value: f64 },
    #[error("column '{0}' is not a numeric quote column")]
    UnknownColumn(String),
    #[error("need at least {needed} rows, found {rows}")]
    TooFewRows { rows: usize, needed: usize },
}

/// One options-contract quote.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionQuoteRecord {
    pub contract: String,
    pub underlying: String,
    pub expiration: NaiveDate,
    pub kind: OptionKind,
    pub strike: f64,
    pub style: String,
    pub bid: f64,
    pub bid_size: u64,
    pub ask: f64,
    pub ask_size: u64,
    pub volume: u64,
    pub open_interest: u64,
    pub quote_date: NaiveDate,
    pub delta: Option<f64>,
    pub gamma: Option<f64>,
    pub theta: Option<f64>,
    pub vega: Option<f64>,
    pub implied_volatility: Option<f64>,
}

impl OptionQuoteRecord {
    /// Value of a numeric column, `None` when the cell is missing.
    pub fn numeric_value(&self, column: &str) -> Result<Option<f64>, DataError> {
        Ok(match column {
            "strike" => Some(self.strike),
            "bid" => Some(self.bid),
            "bid_size" => Some(self.bid_size as f64),
            "ask" => Some(self.ask),
            "ask_size" => Some(self.ask_size as f64),
            "volume" => Some(self.volume as f64),
            "open_interest" => Some(self.open_interest as f64),
            "delta" => self.delta,
            "gamma" => self.gamma,
            "theta" => self.theta,
            "vega" => self.vega,
            "implied_volatility" => self.implied_volatility,
            other => return Err(DataError::UnknownColumn(other.to_string())),
        })
    }
}

/// A parsed quote file: the accepted records plus one diagnostic per
/// rejected row.
#[derive(Debug, Default)]
pub struct QuoteTable {
    pub records: Vec<OptionQuoteRecord>,
    pub diagnostics: Vec<DataError>,
}

impl QuoteTable {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

struct ColumnMap {
    indices: Vec<usize>,
}

const ALL_COLUMNS: [&str; 18] = [
    "contract",
    "underlying",
    "expiration",
    "type",
    "strike",
    "style",
    "bid",
    "bid_size",
    "ask",
    "ask_size",
    "volume",
    "open_interest",
    "quote_date",
    "delta",
    "gamma",
    "theta",
    "vega",
    "implied_volatility",
];

impl ColumnMap {
    fn from_header(header: &csv::StringRecord) -> Result<ColumnMap, DataError> {
        let mut indices = Vec::with_capacity(ALL_COLUMNS.len());
        for name in ALL_COLUMNS {
            let idx = header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DataError::MissingColumn(name.to_string()))?;
            indices.push(idx);
        }
        Ok(ColumnMap { indices })
    }

    fn get<'r>(&self, record: &'r csv::StringRecord, column: usize) -> &'r str {
        record.get(self.indices[column]).unwrap_or("")
    }
}

fn parse_cell<T: FromStr>(raw: &str, row: usize, column: &str) -> Result<T, DataError> {
    raw.trim().parse().map_err(|_| DataError::TypeError {
        row,
        column: column.to_string(),
        value: raw.to_string(),
    })
}

fn parse_optional(raw: &str, row: usize, column: &str) -> Result<Option<f64>, DataError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Ok(None);
    }
    parse_cell::<f64>(trimmed, row, column).map(Some)
}

fn parse_row(
    map: &ColumnMap,
    record: &csv::StringRecord,
    row: usize,
) -> Result<OptionQuoteRecord, DataError> {
    let quote = OptionQuoteRecord {
        contract: map.get(record, 0).to_string(),
        underlying: map.get(record, 1).to_string(),
        expiration: parse_cell(map.get(record, 2), row, "expiration")?,
        kind: parse_cell(map.get(record, 3), row, "type")?,
        strike: parse_cell(map.get(record, 4), row, "strike")?,
        style: map.get(record, 5).to_string(),
        bid: parse_cell(map.get(record, 6), row, "bid")?,
        bid_size: parse_cell(map.get(record, 7), row, "bid_size")?,
        ask: parse_cell(map.get(record, 8), row, "ask")?,
        ask_size: parse_cell(map.get(record, 9), row, "ask_size")?,
        volume: parse_cell(map.get(record, 10), row, "volume")?,
        open_interest: parse_cell(map.get(record, 11), row, "open_interest")?,
        quote_date: parse_cell(map.get(record, 12), row, "quote_date")?,
        delta: parse_optional(map.get(record, 13), row, "delta")?,
        gamma: parse_optional(map.get(record, 14), row, "gamma")?,
        theta: parse_optional(map.get(record, 15), row, "theta")?,
        vega: parse_optional(map.get(record, 16), row, "vega")?,
        implied_volatility: parse_optional(map.get(record, 17), row, "implied_volatility")?,
    };
    if !(quote.strike > 0.0) {
        return Err(DataError::OutOfRange { row, column: "strike".into(), value: quote.strike });
    }
    if !(quote.bid >= 0.0) {
        return Err(DataError::OutOfRange { row, column: "bid".into(), value: quote.bid });
    }
    if !(quote.ask >= quote.bid) {
        return Err(DataError::CrossedMarket { row, bid: quote.bid, ask: quote.ask });
    }
    if let Some(iv) = quote.implied_volatility {
        if !(iv >= 0.0) {
            return Err(DataError::OutOfRange {
                row,
                column: "implied_volatility".into(),
                value: iv,
            });
        }
    }
    Ok(quote)
}

/// Parses a quote CSV. Structural problems (unreadable input, missing
/// columns) fail the whole parse; per-row problems reject only that row
/// and are collected in the returned table's diagnostics.
pub fn parse_quotes<R: Read>(source: R) -> Result<QuoteTable, DataError> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let map = ColumnMap::from_header(reader.headers()?)?;
    let mut table = QuoteTable::default();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        match parse_row(&map, &record, row) {
            Ok(quote) => table.records.push(quote),
            Err(err) => table.diagnostics.push(err),
        }
    }
    Ok(table)
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes records in the canonical column order. Floats use the shortest
/// decimal form that parses back to the same `f64`, so a write/parse
/// round trip reproduces every numeric field bit-exactly; missing cells
/// are written as empty strings.
pub fn write_quotes<W: Write>(records: &[OptionQuoteRecord], writer: &mut W) -> Result<(), DataError> {
    writeln!(writer, "{CANONICAL_HEADER}")?;
    for q in records {
        writeln!(
            writer,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            q.contract,
            q.underlying,
            q.expiration,
            q.kind,
            q.strike,
            q.style,
            q.bid,
            q.bid_size,
            q.ask,
            q.ask_size,
            q.volume,
            q.open_interest,
            q.quote_date,
            fmt_opt(q.delta),
            fmt_opt(q.gamma),
            fmt_opt(q.theta),
            fmt_opt(q.vega),
            fmt_opt(q.implied_volatility),
        )?;
    }
    Ok(())
}

/// Labelled pairwise Pearson correlations. Entries are `None` where the
/// correlation is undefined: fewer than two pairwise-complete rows, or a
/// constant column within the pairwise-complete subset.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub columns: Vec<String>,
    pub values: Array2<Option<f64>>,
}

impl CorrelationMatrix {
    /// CSV with row and column labels; undefined entries render as `NA`.
    pub fn write_csv<W: Write>(&self, writer: &mut W) -> Result<(), DataError> {
        writeln!(writer, "column,{}", self.columns.join(","))?;
        for (i, name) in self.columns.iter().enumerate() {
            let cells: Vec<String> = (0..self.columns.len())
                .map(|j| match self.values[[i, j]] {
                    Some(v) => v.to_string(),
                    None => "NA".to_string(),
                })
                .collect();
            writeln!(writer, "{name},{}", cells.join(","))?;
        }
        Ok(())
    }

    /// True when any entry is an undefined marker.
    pub fn has_undefined(&self) -> bool {
        self.values.iter().any(Option::is_none)
    }
}

/// One-pass (Welford) bivariate accumulation over pairwise-complete rows.
fn pairwise_correlation(xs: &[Option<f64>], ys: &[Option<f64>]) -> Option<f64> {
    let mut n = 0.0f64;
    let (mut mean_x, mut mean_y) = (0.0f64, 0.0f64);
    let (mut m2x, mut m2y, mut cxy) = (0.0f64, 0.0f64, 0.0f64);
    for (x, y) in xs.iter().zip(ys) {
        let (Some(x), Some(y)) = (x, y) else { continue };
        n += 1.0;
        let dx = x - mean_x;
        mean_x += dx / n;
        let dy = y - mean_y;
        mean_y += dy / n;
        m2x += dx * (x - mean_x);
        m2y += dy * (y - mean_y);
        cxy += dx * (y - mean_y);
    }
    if n < 2.0 || m2x <= 0.0 || m2y <= 0.0 {
        return None;
    }
    Some(cxy / (m2x * m2y).sqrt())
}

/// Pearson correlation matrix over the requested numeric columns
/// (pairwise-complete on missing cells). An empty column list selects all
/// numeric columns.
pub fn correlation_matrix(
    table: &QuoteTable,
    columns: &[&str],
) -> Result<CorrelationMatrix, DataError> {
    let selected: Vec<&str> = if columns.is_empty() {
        NUMERIC_COLUMNS.to_vec()
    } else {
        columns.to_vec()
    };
    let mut series: Vec<Vec<Option<f64>>> = Vec::with_capacity(selected.len());
    for name in &selected {
        if !NUMERIC_COLUMNS.contains(name) {
            return Err(DataError::UnknownColumn(name.to_string()));
        }
        series.push(
            table
                .records
                .iter()
                .map(|r| r.numeric_value(name))
                .collect::<Result<_, _>>()?,
        );
    }
    let d = selected.len();
    let mut values = Array2::from_elem((d, d), None);
    for i in 0..d {
        for j in i..d {
            let c = pairwise_correlation(&series[i], &series[j]);
            values[[i, j]] = c;
            values[[j, i]] = c;
        }
    }
    Ok(CorrelationMatrix {
        columns: selected.into_iter().map(str::to_string).collect(),
        values,
    })
}

/// Seeded shuffle followed by a split at `ceil(fraction * n)` rows.
pub fn train_val_split(
    table: &QuoteTable,
    fraction: f64,
    seed: u64,
) -> Result<(QuoteTable, QuoteTable), DataError> {
    if table.len() < 2 {
        return Err(DataError::TooFewRows { rows: table.len(), needed: 2 });
    }
    let n = table.len();
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let n_train = (fraction * n as f64).ceil().clamp(0.0, n as f64) as usize;
    let pick = |idx: &[usize]| QuoteTable {
        records: idx.iter().map(|&i| table.records[i].clone()).collect(),
        diagnostics: Vec::new(),
    };
    let (train_idx, val_idx) = indices.split_at(n_train);
    Ok((pick(train_idx), pick(val_idx)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_row(contract: &str, strike: f64, bid: f64, ask: f64) -> String {
        format!(
            "{contract},XYZ,2026-12-18,put,{strike},american,{bid},10,{ask},12,150,900,\
             2026-08-14,-0.45,0.03,-0.02,0.11,0.24"
        )
    }

    fn parse(text: &str) -> QuoteTable {
        parse_quotes(text.as_bytes()).unwrap()
    }

    #[test]
    fn header_only_file_is_empty_table() {
        let table = parse(&format!("{CANONICAL_HEADER}\n"));
        assert!(table.is_empty());
        assert!(table.diagnostics.is_empty());
    }

    #[test]
    fn parses_typed_record() {
        let text = format!("{CANONICAL_HEADER}\n{}\n", sample_row("XYZ261218P00100000", 100.0, 5.25, 5.5));
        let table = parse(&text);
        assert_eq!(table.len(), 1);
        let q = &table.records[0];
        assert_eq!(q.kind, OptionKind::Put);
        assert_eq!(q.strike, 100.0);
        assert_eq!(q.expiration, NaiveDate::from_ymd_opt(2026, 12, 18).unwrap());
        assert_eq!(q.delta, Some(-0.45));
        assert_eq!(q.volume, 150);
    }

    #[test]
    fn crossed_market_row_is_rejected_with_diagnostic() {
        let text = format!(
            "{CANONICAL_HEADER}\n{}\n{}\n",
            sample_row("A", 100.0, 2.0, 1.5),
            sample_row("B", 100.0, 1.0, 1.5),
        );
        let table = parse(&text);
        assert_eq!(table.len(), 1);
        assert_eq!(table.records[0].contract, "B");
        assert!(matches!(
            table.diagnostics[0],
            DataError::CrossedMarket { row: 1, bid, ask } if bid == 2.0 && ask == 1.5
        ));
    }

    #[test]
    fn bad_number_yields_type_error_diagnostic() {
        let row = sample_row("A", 100.0, 1.0, 1.5).replace("150", "many");
        let table = parse(&format!("{CANONICAL_HEADER}\n{row}\n"));
        assert!(table.is_empty());
        assert!(matches!(
            &table.diagnostics[0],
            DataError::TypeError { row: 1, column, value } if column == "volume" && value == "many"
        ));
    }

    #[test]
    fn non_positive_strike_is_rejected() {
        let table = parse(&format!("{CANONICAL_HEADER}\n{}\n", sample_row("A", 0.0, 1.0, 1.5)));
        assert!(matches!(
            &table.diagnostics[0],
            DataError::OutOfRange { row: 1, column, .. } if column == "strike"
        ));
    }

    #[test]
    fn missing_column_fails_whole_parse() {
        let header = CANONICAL_HEADER.replace(",vega", "");
        let err = parse_quotes(format!("{header}\n").as_bytes()).unwrap_err();
        assert!(matches!(err, DataError::MissingColumn(c) if c == "vega"));
    }

    #[test]
    fn reordered_columns_parse_by_name() {
        let text = "strike,contract,underlying,expiration,type,style,bid,bid_size,ask,ask_size,\
                    volume,open_interest,quote_date,delta,gamma,theta,vega,implied_volatility\n\
                    100,A,XYZ,2026-12-18,call,american,1.0,1,1.5,1,0,0,2026-08-14,,,,,\n";
        let table = parse(text);
        assert_eq!(table.records[0].strike, 100.0);
        assert_eq!(table.records[0].kind, OptionKind::Call);
        assert_eq!(table.records[0].delta, None);
    }

    #[test]
    fn round_trip_preserves_numeric_fields_bit_exactly() {
        let awkward: [f64; 4] = [0.1, 1.0 / 3.0, 5.000000000000001, 2.2250738585072014e-308];
        let text = format!(
            "{CANONICAL_HEADER}\nA,XYZ,2026-12-18,put,{},american,{},7,{},9,3,4,2026-08-14,{},,0.5,,1.7976931348623157\n",
            awkward[0], awkward[1], awkward[2], awkward[3],
        );
        let table = parse(&text);
        assert!(table.diagnostics.is_empty());
        let mut buf = Vec::new();
        write_quotes(&table.records, &mut buf).unwrap();
        let reparsed = parse_quotes(buf.as_slice()).unwrap();
        assert_eq!(reparsed.records, table.records);
        assert_eq!(reparsed.records[0].strike.to_bits(), awkward[0].to_bits());
        assert_eq!(reparsed.records[0].delta.unwrap().to_bits(), awkward[3].to_bits());
    }

    fn table_from_columns(rows: &[(f64, f64, f64)]) -> QuoteTable {
        // Encodes three numeric series as (strike, bid, ask-bid spread on top of bid).
        let records = rows
            .iter()
            .enumerate()
            .map(|(i, &(strike, bid, extra))| OptionQuoteRecord {
                contract: format!("C{i}"),
                underlying: "XYZ".into(),
                expiration: NaiveDate::from_ymd_opt(2026, 12, 18).unwrap(),
                kind: OptionKind::Call,
                strike,
                style: "american".into(),
                bid,
                bid_size: 1,
                ask: bid + extra.abs(),
                ask_size: 1,
                volume: 0,
                open_interest: 0,
                quote_date: NaiveDate::from_ymd_opt(2026, 8, 14).unwrap(),
                delta: Some(extra),
                gamma: None,
                theta: None,
                vega: None,
                implied_volatility: None,
            })
            .collect();
        QuoteTable { records, diagnostics: Vec::new() }
    }

    fn lcg(state: &mut u64) -> f64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (*state >> 11) as f64 / (1u64 << 53) as f64
    }

    #[test]
    fn self_correlation_is_unity() {
        let table = table_from_columns(&[(1.0, 2.0, 0.1), (2.0, 1.0, 0.4), (3.0, 5.0, 0.2)]);
        let m = correlation_matrix(&table, &["strike", "bid"]).unwrap();
        assert!((m.values[[0, 0]].unwrap() - 1.0).abs() < 1e-12);
        assert!((m.values[[1, 1]].unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(m.values[[0, 1]], m.values[[1, 0]]);
    }

    #[test]
    fn exact_linear_relation_gives_unit_correlation() {
        let rows: Vec<(f64, f64, f64)> =
            (0..10).map(|i| (i as f64 + 1.0, 2.0 * (i as f64 + 1.0) + 3.0, 0.0)).collect();
        let table = table_from_columns(&rows);
        let m = correlation_matrix(&table, &["strike", "bid"]).unwrap();
        assert!((m.values[[0, 1]].unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn welford_matches_two_pass_reference() {
        let mut state = 99u64;
        let rows: Vec<(f64, f64, f64)> = (0..50)
            .map(|_| (lcg(&mut state) * 50.0 + 1.0, lcg(&mut state) * 10.0, lcg(&mut state) - 0.5))
            .collect();
        let table = table_from_columns(&rows);
        let names = ["strike", "bid", "delta"];
        let m = correlation_matrix(&table, &names).unwrap();
        let series: Vec<Vec<f64>> = names
            .iter()
            .map(|n| {
                table.records.iter().map(|r| r.numeric_value(n).unwrap().unwrap()).collect()
            })
            .collect();
        for i in 0..3 {
            for j in 0..3 {
                let (x, y) = (&series[i], &series[j]);
                let n = x.len() as f64;
                let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
                let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
                let sx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>().sqrt();
                let sy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum::<f64>().sqrt();
                let reference = cov / (sx * sy);
                assert!(
                    (m.values[[i, j]].unwrap() - reference).abs() < 1e-12,
                    "entry ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn constant_column_yields_undefined_marker() {
        let table = table_from_columns(&[(1.0, 7.0, 0.1), (2.0, 7.0, 0.4), (3.0, 7.0, 0.2)]);
        let m = correlation_matrix(&table, &["strike", "bid"]).unwrap();
        assert_eq!(m.values[[0, 1]], None);
        assert_eq!(m.values[[1, 1]], None);
        assert!(m.values[[0, 0]].is_some());
        assert!(m.has_undefined());
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("column,strike,bid\n"));
        assert!(text.contains(",NA"));
    }

    #[test]
    fn missing_cells_are_excluded_pairwise() {
        let mut table = table_from_columns(&[
            (1.0, 1.0, 0.0),
            (2.0, 2.0, 0.0),
            (3.0, 3.0, 0.0),
            (4.0, 100.0, 0.0),
        ]);
        // Drop delta on the outlier row: strike-delta uses only 3 rows.
        table.records[3].delta = Some(1.0);
        table.records[0].delta = None;
        let m = correlation_matrix(&table, &["strike", "delta"]).unwrap();
        assert!(m.values[[0, 1]].is_some());
        let sub = pairwise_correlation(
            &[None, Some(2.0), Some(3.0), Some(4.0)],
            &[None, Some(0.0), Some(0.0), Some(1.0)],
        );
        assert_eq!(m.values[[0, 1]], sub);
    }

    #[test]
    fn correlation_invariant_under_positive_affine_rescale() {
        let mut state = 5u64;
        let rows: Vec<(f64, f64, f64)> = (0..40)
            .map(|_| (lcg(&mut state) * 9.0 + 1.0, lcg(&mut state), lcg(&mut state) - 0.5))
            .collect();
        let table = table_from_columns(&rows);
        let scaled_rows: Vec<(f64, f64, f64)> =
            rows.iter().map(|&(a, b, c)| (a * 1000.0, b, c)).collect();
        let scaled = table_from_columns(&scaled_rows);
        let m1 = correlation_matrix(&table, &["strike", "bid", "delta"]).unwrap();
        let m2 = correlation_matrix(&scaled, &["strike", "bid", "delta"]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let (a, b) = (m1.values[[i, j]].unwrap(), m2.values[[i, j]].unwrap());
                assert!((a - b).abs() < 1e-12, "entry ({i},{j}): {a} vs {b}");
            }
        }
    }

    #[test]
    fn unknown_column_is_rejected() {
        let table = table_from_columns(&[(1.0, 1.0, 0.0), (2.0, 2.0, 0.0)]);
        assert!(matches!(
            correlation_matrix(&table, &["strike", "contract"]),
            Err(DataError::UnknownColumn(c)) if c == "contract"
        ));
    }

    #[test]
    fn split_sizes_follow_ceiling_rule() {
        let rows: Vec<(f64, f64, f64)> = (0..10).map(|i| (i as f64 + 1.0, 1.0, 0.1)).collect();
        let table = table_from_columns(&rows);
        let (train, val) = train_val_split(&table, 0.8, 7).unwrap();
        assert_eq!((train.len(), val.len()), (8, 2));
    }

    #[test]
    fn split_is_seeded_and_partitions_rows() {
        let rows: Vec<(f64, f64, f64)> = (0..25).map(|i| (i as f64 + 1.0, 1.0, 0.1)).collect();
        let table = table_from_columns(&rows);
        let (a_train, a_val) = train_val_split(&table, 0.6, 3).unwrap();
        let (b_train, b_val) = train_val_split(&table, 0.6, 3).unwrap();
        assert_eq!(a_train.records, b_train.records);
        assert_eq!(a_val.records, b_val.records);
        let mut seen: Vec<&str> = a_train
            .records
            .iter()
            .chain(&a_val.records)
            .map(|r| r.contract.as_str())
            .collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 25);
        let (c_train, _) = train_val_split(&table, 0.6, 4).unwrap();
        assert_ne!(a_train.records, c_train.records);
    }

    #[test]
    fn split_rejects_tiny_tables() {
        let table = table_from_columns(&[(1.0, 1.0, 0.0)]);
        assert!(matches!(
            train_val_split(&table, 0.8, 0),
            Err(DataError::TooFewRows { rows: 1, needed: 2 })
        ));
    }
}
