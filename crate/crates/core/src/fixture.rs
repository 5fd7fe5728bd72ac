//! Plain-text oracle fixtures: one check per line,
//! `name | inputs | value | error | seed`.
//!
//! Values are frozen from the oracle routes (quadrature, Monte Carlo).
//! Verification evaluates the library's own implementation at the stored
//! inputs and passes when it lands within `error` of the frozen value.

use crate::casestudies::{gauss_stdmean, marginalization, multinomial, multinormal, neyman_scott, stein};
use crate::geometry::fisher_information;
use crate::geometry::models::gaussian;
use crate::oracle::IntegrationSpec;
use crate::specfun::log_gamma;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

pub const FIXTURE_VERSION: u32 = 1;
const VERSION_TAG: &str = "@version";

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported fixture version {0}")]
    Version(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureEntry {
    pub name: String,
    pub inputs: BTreeMap<String, String>,
    pub value: f64,
    pub error: f64,
    pub seed: u64,
    /// 1-based source line; 0 for entries built in memory.
    pub line: usize,
}

impl FixtureEntry {
    pub fn new(name: &str, inputs: &[(&str, String)], value: f64, error: f64, seed: u64) -> Self {
        Self {
            name: name.to_string(),
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            value,
            error,
            seed,
            line: 0,
        }
    }
}

impl fmt::Display for FixtureEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let inputs: Vec<String> = self.inputs.iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(
            f,
            "{} | {} | {:.16e} | {:.3e} | {}",
            self.name,
            inputs.join(";"),
            self.value,
            self.error,
            self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Fixture {
    pub version: u32,
    pub entries: Vec<FixtureEntry>,
}

impl Fixture {
    pub fn parse(text: &str) -> Result<Self, FixtureError> {
        let mut version = FIXTURE_VERSION;
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            if let Some(rest) = s.strip_prefix(VERSION_TAG) {
                version = rest.trim().parse().map_err(|_| FixtureError::Parse {
                    line,
                    message: format!("bad version tag '{s}'"),
                })?;
                if version != FIXTURE_VERSION {
                    return Err(FixtureError::Version(version));
                }
                continue;
            }
            entries.push(parse_entry(s, line)?);
        }
        Ok(Self { version, entries })
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "{VERSION_TAG} {}\n# name | inputs | value | error | seed\n",
            self.version
        );
        for e in &self.entries {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }
}

fn parse_entry(s: &str, line: usize) -> Result<FixtureEntry, FixtureError> {
    let err = |message: String| FixtureError::Parse { line, message };
    let fields: Vec<&str> = s.split('|').map(str::trim).collect();
    if fields.len() != 5 {
        return Err(err(format!("expected 5 '|'-separated fields, found {}", fields.len())));
    }
    if fields[0].is_empty() {
        return Err(err("empty check name".into()));
    }
    let mut inputs = BTreeMap::new();
    for kv in fields[1].split(';').map(str::trim).filter(|t| !t.is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| err(format!("input '{kv}' is not key=value")))?;
        inputs.insert(k.trim().to_string(), v.trim().to_string());
    }
    let num = |what: &str, t: &str| -> Result<f64, FixtureError> {
        t.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| err(format!("{what} '{t}' is not a finite number")))
    };
    let value = num("value", fields[2])?;
    let error = num("error", fields[3])?;
    if error < 0.0 {
        return Err(err(format!("negative error {error}")));
    }
    let seed = fields[4]
        .parse::<u64>()
        .map_err(|_| err(format!("seed '{}' is not an unsigned integer", fields[4])))?;
    Ok(FixtureEntry {
        name: fields[0].to_string(),
        inputs,
        value,
        error,
        seed,
        line,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntryOutcome {
    pub line: usize,
    pub name: String,
    pub expected: f64,
    pub actual: Option<f64>,
    pub deviation: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct VerifyReport {
    pub outcomes: Vec<EntryOutcome>,
    pub warnings: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.pass)
    }

    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| !o.pass).count()
    }
}

/// Re-evaluates every entry and compares it with the frozen value.
pub fn verify(fixture: &Fixture) -> VerifyReport {
    let mut report = VerifyReport::default();
    if fixture.entries.is_empty() {
        report.warnings.push("fixture has no entries".into());
    }
    for e in &fixture.entries {
        let outcome = match evaluate(e) {
            Ok(actual) => {
                let dev = (actual - e.value).abs();
                EntryOutcome {
                    line: e.line,
                    name: e.name.clone(),
                    expected: e.value,
                    actual: Some(actual),
                    deviation: Some(dev),
                    tolerance: e.error,
                    pass: dev <= e.error,
                    message: None,
                }
            }
            Err(message) => EntryOutcome {
                line: e.line,
                name: e.name.clone(),
                expected: e.value,
                actual: None,
                deviation: None,
                tolerance: e.error,
                pass: false,
                message: Some(message),
            },
        };
        report.outcomes.push(outcome);
    }
    report
}

struct Inputs<'a>(&'a BTreeMap<String, String>);

impl Inputs<'_> {
    fn raw(&self, k: &str) -> Result<&str, String> {
        self.0
            .get(k)
            .map(String::as_str)
            .ok_or_else(|| format!("missing input '{k}'"))
    }

    fn f(&self, k: &str) -> Result<f64, String> {
        self.raw(k)?.parse().map_err(|_| format!("input '{k}' is not a number"))
    }

    fn u(&self, k: &str) -> Result<usize, String> {
        self.raw(k)?
            .parse()
            .map_err(|_| format!("input '{k}' is not a non-negative integer"))
    }

    fn list<T: std::str::FromStr>(&self, k: &str) -> Result<Vec<T>, String> {
        self.raw(k)?
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<T>()
                    .map_err(|_| format!("input '{k}' has a bad element '{t}'"))
            })
            .collect()
    }
}

/// The library value for a fixture entry.
pub fn evaluate(e: &FixtureEntry) -> Result<f64, String> {
    let i = Inputs(&e.inputs);
    let s = |r: Result<f64, crate::casestudies::CaseStudyError>| r.map_err(|x| x.to_string());
    match e.name.as_str() {
        "gauss.evidence_mu" => s(gauss_stdmean::ln_evidence_mu::<f64>(i.u("n")?).map(f64::exp)),
        "gauss.evidence_lambda" => s(gauss_stdmean::ln_evidence_lambda::<f64>(i.u("n")?).map(f64::exp)),
        "multinormal.ball" => s(multinormal::credible_ball_probability::<f64>(i.u("q")?, i.u("mn")?)),
        "multinomial.evidence" => {
            s(multinomial::ln_evidence::<f64>(&i.list::<u64>("counts")?, i.u("m")?).map(f64::exp))
        }
        "stein.averaged_mu" | "stein.averaged_mu2" | "stein.averaged_theta2" => {
            let input = stein::SteinInput::new(i.list::<f64>("x")?).map_err(|x| x.to_string())?;
            let (xb, s2, m) = (input.mean(), input.variance(), input.m());
            match e.name.as_str() {
                "stein.averaged_theta2" => s(stein::stein_averaged_theta2(input.mean_square(), s2, m)),
                name => {
                    let k = i.u("i")?;
                    let xi = *input.x.get(k).ok_or_else(|| format!("index {k} out of range"))?;
                    if name == "stein.averaged_mu" {
                        s(stein::stein_averaged_mu(xi, xb, s2, m))
                    } else {
                        s(stein::stein_averaged_mu2(xi, xb, s2, m))
                    }
                }
            }
        }
        "neyman_scott.averaged_mean" => s(neyman_scott::averaged_mean(i.u("m")?, i.f("s2")?)),
        "neyman_scott.evidence" => s(neyman_scott::ln_evidence(i.u("m")?, i.f("s2")?, i.f("zeta0")?).map(f64::exp)),
        "marginalization.variance" => s(marginalization::posterior_variance(i.u("m")?, i.f("s2")?)),
        "fisher.gaussian" => {
            let alpha = [i.f("mu")?, i.f("sigma")?];
            let (r, c) = (i.u("row")?, i.u("col")?);
            if r > 1 || c > 1 {
                return Err("row and col must be 0 or 1".into());
            }
            let model = gaussian::<f64>().map_err(|x| x.to_string())?;
            let j =
                fisher_information(&model, &alpha, &IntegrationSpec::quadrature(1e-10)).map_err(|x| x.to_string())?;
            Ok(j.matrix[(r, c)])
        }
        "oracle.dirichlet_half_normalization" => {
            let k = i.u("k")?;
            let g = log_gamma(0.5).map_err(|x| x.to_string())?;
            let total = log_gamma(0.5 * k as f64).map_err(|x| x.to_string())?;
            Ok((k as f64 * g - total).exp())
        }
        other => Err(format!("unknown check '{other}'")),
    }
}
