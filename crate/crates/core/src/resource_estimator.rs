//! Parameter tables, gadget-size formulas and the table audit.
//! All arithmetic is exact over `u128`.

use crate::ceil_log2;
use crate::garden_hose::predicted_pipe_count;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    pub label: String,
    pub security_bits: u64,
    pub n: u64,
    pub q: u64,
    pub sigma: f64,
    pub width_bits: u64,
    pub bp_length: u128,
    pub epr_claimed: u128,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub security_bits: u64,
    pub dss_epr: u128,
    pub ours_epr: u128,
}

impl ComparisonRow {
    /// `dss / ours` when it divides exactly.
    pub fn factor(&self) -> Option<u128> {
        self.dss_epr.is_multiple_of(self.ours_epr).then(|| self.dss_epr / self.ours_epr)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tables {
    pub params: Vec<ParamRow>,
    pub comparison: Vec<ComparisonRow>,
}

pub fn builtin_tables() -> Tables {
    let row = |label: &str, security_bits, n, log_q: u32, log_l: u32, log_epr: u32| ParamRow {
        label: label.into(),
        security_bits,
        n,
        q: 1 << log_q,
        sigma: 3.2,
        width_bits: log_q as u64,
        bp_length: 1 << log_l,
        epr_claimed: 1 << log_epr,
    };
    let cmp = |label: &str, security_bits, dss: u32, ours: u32| ComparisonRow {
        label: label.into(),
        security_bits,
        dss_epr: 1 << dss,
        ours_epr: 1 << ours,
    };
    Tables {
        params: vec![
            row("128-bit", 128, 512, 16, 14, 18),
            row("192-bit", 192, 768, 20, 17, 22),
            row("256-bit", 256, 1024, 24, 20, 26),
        ],
        comparison: vec![cmp("128-bit", 128, 33, 18), cmp("192-bit", 192, 38, 22), cmp("256-bit", 256, 44, 26)],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Scheme {
    Ours,
    Dss,
    RingLwe,
    Ntru,
    Abe,
    Sinha,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "ours" => Scheme::Ours,
            "dss" => Scheme::Dss,
            "ring_lwe" | "ringlwe" => Scheme::RingLwe,
            "ntru" => Scheme::Ntru,
            "abe" => Scheme::Abe,
            "sinha" => Scheme::Sinha,
            other => return Err(Error::Input(format!("unknown scheme {other:?}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Estimate {
    pub scheme: Scheme,
    pub n: u64,
    pub q: u64,
    pub formula: String,
    pub value: u128,
    pub width_bits: Option<u64>,
    pub length: Option<u128>,
    /// Executable pipe count `2qn + q + 1` of the state-level network.
    pub executable_pipes: Option<u128>,
    pub anchors: Vec<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extras {
    /// Security parameter for the DSS shape; defaults to the table row matching `n`.
    pub lambda: Option<u64>,
}

fn table_anchor(n: u64) -> Option<(ParamRow, ComparisonRow)> {
    let t = builtin_tables();
    let p = t.params.into_iter().find(|r| r.n == n)?;
    let c = t.comparison.into_iter().find(|r| r.security_bits == p.security_bits)?;
    Some((p, c))
}

pub fn estimate(scheme: Scheme, n: u64, q: u64, extras: Extras) -> Result<Estimate> {
    if n == 0 || q < 2 {
        return Err(Error::Input("n must be positive and q at least 2".into()));
    }
    let lq = u128::from(ceil_log2(q));
    let n128 = u128::from(n);
    let anchor = table_anchor(n);
    let mut e = Estimate {
        scheme,
        n,
        q,
        formula: String::new(),
        value: 0,
        width_bits: None,
        length: None,
        executable_pipes: None,
        anchors: Vec::new(),
    };
    match scheme {
        Scheme::Ours | Scheme::Abe => {
            let length = n128 * lq;
            e.formula = "w = ceil(log2 q); L = n * w; epr = w * L".into();
            e.width_bits = Some(lq as u64);
            e.length = Some(length);
            e.value = lq * length;
            e.executable_pipes = Some(2 * u128::from(q) * n128 + u128::from(q) + 1);
            if let Some((p, c)) = anchor {
                e.anchors.push(format!("parameter table {}: L = {}, epr = {}", p.label, p.bp_length, p.epr_claimed));
                e.anchors.push(format!("comparison table {}: ours = {}", c.label, c.ours_epr));
            }
        }
        Scheme::Dss => {
            let lambda = match (extras.lambda, &anchor) {
                (Some(l), _) => l,
                (None, Some((p, _))) => p.security_bits,
                (None, None) => return Err(Error::Input("DSS needs --lambda when n is not a table row".into())),
            };
            if lambda < 2 {
                return Err(Error::Input("lambda must be at least 2".into()));
            }
            let d = ceil_log2(lambda);
            e.formula = "L = 4^ceil(log2 lambda) (width-5 Barrington shape)".into();
            e.length = Some(1u128 << (2 * d));
            e.value = 1u128 << (2 * d);
            if let Some((_, c)) = anchor {
                e.anchors.push(format!("comparison table {}: dss = {}", c.label, c.dss_epr));
            }
        }
        Scheme::RingLwe | Scheme::Ntru => {
            e.formula = "n^2 * ceil(log2 q)".into();
            e.value = n128 * n128 * lq;
        }
        Scheme::Sinha => {
            let ln = u128::from(ceil_log2(n));
            e.formula = "n * ceil(log2 n)".into();
            e.width_bits = Some(ln as u64);
            e.length = Some(n128);
            e.value = n128 * ln;
        }
    }
    Ok(e)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Flag,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditLine {
    pub label: String,
    pub computed: u128,
    pub claimed: u128,
    /// `claimed / computed` as a reduced fraction.
    pub ratio: (u128, u128),
    pub verdict: Verdict,
}

impl AuditLine {
    pub fn ratio_f64(&self) -> f64 {
        self.ratio.0 as f64 / self.ratio.1 as f64
    }
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Checks `width_bits * bp_length == epr_claimed` per row.
pub fn audit(rows: &[ParamRow]) -> Vec<AuditLine> {
    rows.iter()
        .map(|r| {
            let computed = u128::from(r.width_bits) * r.bp_length;
            let g = gcd(r.epr_claimed, computed).max(1);
            AuditLine {
                label: r.label.clone(),
                computed,
                claimed: r.epr_claimed,
                ratio: (r.epr_claimed / g, computed / g),
                verdict: if computed == r.epr_claimed { Verdict::Pass } else { Verdict::Flag },
            }
        })
        .collect()
}

/// Pipe count the garden-hose builder produces for modulus `q` and dimension `n`.
pub fn executable_pipe_count(q: u64, n: usize) -> usize {
    predicted_pipe_count(q, n)
}

pub fn estimate_table(e: &Estimate) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scheme      {:?}", e.scheme);
    let _ = writeln!(out, "n, q        {}, {}", e.n, e.q);
    let _ = writeln!(out, "formula     {}", e.formula);
    let _ = writeln!(out, "value       {} (2^{:.2})", e.value, (e.value as f64).log2());
    if let Some(w) = e.width_bits {
        let _ = writeln!(out, "width bits  {w}");
    }
    if let Some(l) = e.length {
        let _ = writeln!(out, "length      {l}");
    }
    if let Some(p) = e.executable_pipes {
        let _ = writeln!(out, "pipes       {p} (state-level network)");
    }
    for a in &e.anchors {
        let _ = writeln!(out, "anchor      {a}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ours_128() {
        let e = estimate(Scheme::Ours, 512, 1 << 16, Extras::default()).unwrap();
        assert_eq!((e.width_bits, e.length, e.value), (Some(16), Some(8192), 1 << 17));
        assert_eq!(e.executable_pipes, Some(2 * 65536 * 512 + 65536 + 1));
    }

    #[test]
    fn ring_lwe_256() {
        let e = estimate(Scheme::RingLwe, 1024, 1 << 24, Extras::default()).unwrap();
        assert_eq!(e.value, 1024 * 1024 * 24);
    }

    #[test]
    fn scheme_names_parse() {
        assert_eq!("ring-lwe".parse::<Scheme>().unwrap(), Scheme::RingLwe);
        assert!("barrington".parse::<Scheme>().is_err());
    }
}
