//! Snapshot files and CSV/JSON emission.
//!
//! Floats are written in Rust's shortest round-trip form, so a snapshot read
//! back reproduces the field bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::diagnostics::{DiagnosticsRecord, DIAGNOSTICS_HEADER};
use crate::entropy_lab::{EntropyBudget, BUDGET_HEADER};
use crate::error::{Error, Result};
use crate::spectral_x::Field2D;

pub const SNAPSHOT_MAGIC: &str = "AXIHEE";
pub const SNAPSHOT_VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SnapshotKind {
    Hydro,
    Rescaled { eps: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub kind: SnapshotKind,
    pub t: f64,
    pub w: Field2D,
}

impl Snapshot {
    pub fn to_text(&self) -> String {
        let mut out = format!("{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION} kind=");
        match self.kind {
            SnapshotKind::Hydro => out.push_str("hydro"),
            SnapshotKind::Rescaled { eps } => {
                let _ = write!(out, "rescaled eps={eps:e}");
            }
        }
        let _ = writeln!(out, " nx={} na={} t={:e}", self.w.nx(), self.w.na(), self.t);
        for j in 0..self.w.na() {
            let row: Vec<String> = self.w.row(j).iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty snapshot".into()))?;
        let mut tokens = header.split_whitespace();
        if tokens.next() != Some(SNAPSHOT_MAGIC) || tokens.next() != Some(SNAPSHOT_VERSION) {
            return Err(Error::Parse(format!("bad snapshot header: {header}")));
        }
        let (mut kind, mut eps, mut nx, mut na, mut t) = (None, None, None, None, None);
        for tok in tokens {
            let (key, val) = tok.split_once('=').ok_or_else(|| Error::Parse(format!("bad header token {tok}")))?;
            match key {
                "kind" => kind = Some(val.to_string()),
                "eps" => eps = Some(parse_num::<f64>(val, "eps")?),
                "nx" => nx = Some(parse_num::<usize>(val, "nx")?),
                "na" => na = Some(parse_num::<usize>(val, "na")?),
                "t" => t = Some(parse_num::<f64>(val, "t")?),
                _ => return Err(Error::Parse(format!("unknown header key {key}"))),
            }
        }
        let missing = |k: &str| Error::Parse(format!("snapshot header lacks {k}"));
        let kind = match kind.as_deref() {
            Some("hydro") => SnapshotKind::Hydro,
            Some("rescaled") => SnapshotKind::Rescaled { eps: eps.ok_or_else(|| missing("eps"))? },
            Some(other) => return Err(Error::Parse(format!("unknown snapshot kind {other}"))),
            None => return Err(missing("kind")),
        };
        let (nx, na, t) = (nx.ok_or_else(|| missing("nx"))?, na.ok_or_else(|| missing("na"))?, t.ok_or_else(|| missing("t"))?);
        let mut values = Vec::with_capacity(nx * na);
        for (j, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
            let before = values.len();
            for tok in line.split_whitespace() {
                values.push(parse_num::<f64>(tok, "value")?);
            }
            if values.len() - before != nx {
                return Err(Error::Parse(format!("row {j} has {} values, expected {nx}", values.len() - before)));
            }
        }
        if values.len() != nx * na {
            return Err(Error::Parse(format!("expected {na} rows, found {}", values.len() / nx.max(1))));
        }
        Ok(Self { kind, t, w: Field2D::from_values(nx, na, values)? })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse(format!("cannot parse {what} from {s:?}")))
}

pub fn diagnostics_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::from(DIAGNOSTICS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

pub fn budget_csv(budgets: &[EntropyBudget]) -> String {
    let mut out = String::from(BUDGET_HEADER);
    out.push('\n');
    for b in budgets {
        out.push_str(&b.csv_row());
        out.push('\n');
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, to_json(value)? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial_calculus::make_grid;

    #[test]
    fn snapshot_round_trip_is_exact() {
        let g = make_grid(6).unwrap();
        let w = Field2D::from_fn(8, &g, |x, a| (x + 0.1).ln() * a / 3.0).unwrap();
        for kind in [SnapshotKind::Hydro, SnapshotKind::Rescaled { eps: 0.1 }] {
            let s = Snapshot { kind, t: 0.123, w: w.clone() };
            let text = s.to_text();
            assert!(text.starts_with("AXIHEE v1 kind="));
            assert_eq!(Snapshot::parse(&text).unwrap(), s);
        }
    }

    #[test]
    fn snapshot_header_is_self_describing() {
        let g = make_grid(6).unwrap();
        let s = Snapshot { kind: SnapshotKind::Rescaled { eps: 0.05 }, t: 0.5, w: Field2D::zeros(8, g.len()).unwrap() };
        assert_eq!(s.to_text().lines().next().unwrap(), "AXIHEE v1 kind=rescaled eps=5e-2 nx=8 na=6 t=5e-1");
    }

    #[test]
    fn malformed_snapshots_are_rejected() {
        for bad in [
            "",
            "NOPE v1 kind=hydro nx=8 na=1 t=0",
            "AXIHEE v1 kind=hydro nx=2 na=1 t=0\n1 2 3",
            "AXIHEE v1 kind=hydro nx=2 na=2 t=0\n1 2",
            "AXIHEE v1 kind=rescaled nx=2 na=1 t=0\n1 2",
            "AXIHEE v1 kind=hydro nx=2 na=1 t=zero\n1 2",
            "AXIHEE v1 kind=hydro nx=2 na=1 t=0 color=red\n1 2",
        ] {
            assert!(matches!(Snapshot::parse(bad), Err(Error::Parse(_)) | Err(Error::InvalidGrid(_))), "{bad}");
        }
    }
}
