//! Per-tick trajectory logs as CSV.

use slipwalk::{Phase, Side, TrajectoryLog};

use crate::error::CliError;

pub const HEADER: &str = "t,x,dx,ddx,y,dy,ddy,zx,zy,rcof_x,rcof_y,mu_ap,foot_x,foot_y,side,phase,solver_iters";

pub const COLUMNS: [&str; 17] = [
    "t",
    "x",
    "dx",
    "ddx",
    "y",
    "dy",
    "ddy",
    "zx",
    "zy",
    "rcof_x",
    "rcof_y",
    "mu_ap",
    "foot_x",
    "foot_y",
    "side",
    "phase",
    "solver_iters",
];

/// One CSV record.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub t: f64,
    pub x: f64,
    pub dx: f64,
    pub ddx: f64,
    pub y: f64,
    pub dy: f64,
    pub ddy: f64,
    pub zx: f64,
    pub zy: f64,
    pub rcof_x: f64,
    pub rcof_y: f64,
    pub mu_ap: f64,
    pub foot_x: f64,
    pub foot_y: f64,
    pub side: Side,
    pub phase: Phase,
    pub solver_iters: usize,
}

impl CsvRow {
    fn numbers(&self) -> [f64; 14] {
        [
            self.t,
            self.x,
            self.dx,
            self.ddx,
            self.y,
            self.dy,
            self.ddy,
            self.zx,
            self.zy,
            self.rcof_x,
            self.rcof_y,
            self.mu_ap,
            self.foot_x,
            self.foot_y,
        ]
    }
}

pub fn rows_from_log(log: &TrajectoryLog) -> Vec<CsvRow> {
    log.samples
        .iter()
        .map(|s| CsvRow {
            t: s.time,
            x: s.x.position,
            dx: s.x.velocity,
            ddx: s.x.acceleration,
            y: s.y.position,
            dy: s.y.velocity,
            ddy: s.y.acceleration,
            zx: s.zmp_x,
            zy: s.zmp_y,
            rcof_x: s.rcof_x,
            rcof_y: s.rcof_y,
            mu_ap: s.mu_ap,
            foot_x: s.foot.x,
            foot_y: s.foot.y,
            side: s.foot.side,
            phase: s.phase,
            solver_iters: s.solver_iterations,
        })
        .collect()
}

/// `printf("%.9g")` formatting.
pub fn format_g9(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        strip_zeros(format!("{v:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip_zeros(mantissa.to_string()), exp.abs())
    }
}

fn strip_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn to_csv(rows: &[CsvRow]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::with_capacity(rows.len() * 200));
    let io = |e: csv::Error| unreachable!("writing to memory cannot fail: {e}");
    w.write_record(COLUMNS).unwrap_or_else(io);
    for r in rows {
        let mut record: Vec<String> = r.numbers().iter().map(|&v| format_g9(v)).collect();
        record.push(r.side.letter().to_string());
        record.push(r.phase.code().to_string());
        record.push(r.solver_iters.to_string());
        w.write_record(&record).unwrap_or_else(io);
    }
    String::from_utf8(w.into_inner().expect("in-memory buffer")).expect("ASCII output")
}

fn field_error(line: u64, column: &str, value: &str) -> CliError {
    CliError::Validation(format!("line {line}: column `{column}` has invalid value `{value}`"))
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>, CliError> {
    if text.is_empty() {
        return Err(CliError::Validation("CSV is empty".into()));
    }
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CliError::Validation(format!("CSV header: {e}")))?
        .clone();
    for (k, expected) in COLUMNS.iter().enumerate() {
        match header.get(k) {
            Some(found) if found == *expected => {}
            Some(found) => {
                return Err(CliError::Validation(format!(
                    "header column {} is `{found}`, expected `{expected}`",
                    k + 1
                )))
            }
            None => return Err(CliError::Validation(format!("header is missing column `{expected}`"))),
        }
    }
    if let Some(extra) = header.get(COLUMNS.len()) {
        return Err(CliError::Validation(format!("unexpected extra column `{extra}`")));
    }

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Validation(format!("CSV: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != COLUMNS.len() {
            return Err(CliError::Validation(format!(
                "line {line}: expected {} fields, found {}",
                COLUMNS.len(),
                record.len()
            )));
        }
        let cell = |i: usize| &record[i];
        let mut nums = [0.0; 14];
        for (i, n) in nums.iter_mut().enumerate() {
            *n = cell(i).parse().map_err(|_| field_error(line, COLUMNS[i], cell(i)))?;
        }
        let side = match cell(14) {
            "L" => Side::Left,
            "R" => Side::Right,
            v => return Err(field_error(line, "side", v)),
        };
        let phase = match cell(15) {
            "SS" => Phase::SingleSupport,
            "DS" => Phase::DoubleSupport,
            v => return Err(field_error(line, "phase", v)),
        };
        let solver_iters = cell(16)
            .parse()
            .map_err(|_| field_error(line, "solver_iters", cell(16)))?;
        let [t, x, dx, ddx, y, dy, ddy, zx, zy, rcof_x, rcof_y, mu_ap, foot_x, foot_y] = nums;
        rows.push(CsvRow {
            t,
            x,
            dx,
            ddx,
            y,
            dy,
            ddy,
            zx,
            zy,
            rcof_x,
            rcof_y,
            mu_ap,
            foot_x,
            foot_y,
            side,
            phase,
            solver_iters,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g9_matches_printf() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.1, "0.1"),
            (-0.5, "-0.5"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (1.0 / 3.0, "0.333333333"),
            (2.0 / 3.0 * 1e-7, "6.66666667e-08"),
            (1e-5, "1e-05"),
            (0.0001234, "0.0001234"),
            (9.999999999, "10"),
            (-7.988277268093782e-3, "-0.00798827727"),
        ];
        for (v, s) in cases {
            assert_eq!(format_g9(v), s, "{v}");
        }
    }

    #[test]
    fn header_matches_columns() {
        assert_eq!(COLUMNS.join(","), HEADER);
    }

    #[test]
    fn schema_errors_name_the_column() {
        let bad = HEADER.replace("rcof_x", "rcofx");
        let err = parse_csv(&bad).unwrap_err().to_string();
        assert!(err.contains("rcofx") && err.contains("rcof_x"), "{err}");
        let row = format!("{HEADER}\n0.1,0,0,0,0,0,0,0,0,0,0,0.5,0,0,X,SS,3\n");
        assert!(parse_csv(&row).unwrap_err().to_string().contains("`side`"));
        let short = format!("{HEADER}\n0.1,0,0\n");
        assert!(parse_csv(&short).is_err());
        assert!(parse_csv("").is_err());
    }
}
