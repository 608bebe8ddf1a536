//! Sweep configuration and its flat `key=value` text form.
//!
//! One assignment per line; blank lines and lines starting with `#` are
//! skipped. Keys are the long CLI flag names without the leading dashes:
//!
//! ```text
//! family = toda
//! lambda = 0.05
//! alpha-min = 4
//! alpha-max = 12
//! alpha-step = 1
//! panel-n = 20
//! tol = 1e-8
//! domain-L = 30
//! format = csv
//! out = sweep.csv
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::Family;
use crate::quadrature::DEFAULT_PANEL_N;

/// Every key accepted by [`SweepConfig::apply`].
pub const KEYS: [&str; 10] = [
    "family",
    "lambda",
    "alpha-min",
    "alpha-max",
    "alpha-step",
    "panel-n",
    "tol",
    "domain-L",
    "format",
    "out",
];

/// Report encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Config(format!(
                "unknown format {s:?} (expected csv or json)"
            ))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// Parses `key=value` lines into pairs, in file order.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected key=value",
                lineno + 1
            )));
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub family: Family,
    pub lambda: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_step: f64,
    pub panel_n: usize,
    pub tol: f64,
    /// Overrides the half-line truncation length used for the constants and
    /// the correction grids.
    pub domain_l: Option<f64>,
    pub format: Format,
    /// `None` writes to standard output.
    pub out: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            family: Family::Toda,
            lambda: 0.05,
            alpha_min: 4.0,
            alpha_max: 12.0,
            alpha_step: 1.0,
            panel_n: DEFAULT_PANEL_N,
            tol: 1e-8,
            domain_l: None,
            format: Format::Csv,
            out: None,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

impl SweepConfig {
    /// Sets one field from its textual key and value.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "family" => {
                self.family = value
                    .parse()
                    .map_err(|_| Error::Config(format!("family: unknown family {value:?}")))?
            }
            "lambda" => self.lambda = num(key, value)?,
            "alpha-min" => self.alpha_min = num(key, value)?,
            "alpha-max" => self.alpha_max = num(key, value)?,
            "alpha-step" => self.alpha_step = num(key, value)?,
            "panel-n" => self.panel_n = num(key, value)?,
            "tol" => self.tol = num(key, value)?,
            "domain-L" => self.domain_l = Some(num(key, value)?),
            "format" => self.format = value.parse()?,
            "out" => {
                self.out = if value.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(value))
                }
            }
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Defaults overridden by the assignments in `text`, then validated.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in parse_config(text)? {
            cfg.apply(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !self.lambda.is_finite() {
            return bad(format!("lambda must be finite, got {}", self.lambda));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return bad(format!("tol must lie in (0, 1), got {}", self.tol));
        }
        if !(self.alpha_step > 0.0 && self.alpha_step.is_finite()) {
            return bad(format!(
                "alpha-step must be positive, got {}",
                self.alpha_step
            ));
        }
        if !self.alpha_min.is_finite() || !self.alpha_max.is_finite() {
            return bad("alpha range must be finite".into());
        }
        if self.alpha_min <= 0.0 && self.alpha_max >= self.alpha_min {
            return bad(format!(
                "alphas must be positive, got alpha-min = {}",
                self.alpha_min
            ));
        }
        if (self.alpha_max - self.alpha_min) / self.alpha_step > 1e4 {
            return bad("more than 10000 alpha values".into());
        }
        if !(1..=512).contains(&self.panel_n) {
            return bad(format!("panel-n must lie in 1..=512, got {}", self.panel_n));
        }
        if let Some(l) = self.domain_l {
            if !(l > 0.0 && l.is_finite()) {
                return bad(format!("domain-L must be positive, got {l}"));
            }
        }
        Ok(())
    }

    /// `alpha_min, alpha_min + step, …` up to `alpha_max`; empty when
    /// `alpha_max < alpha_min`.
    pub fn alphas(&self) -> Vec<f64> {
        if self.alpha_max < self.alpha_min {
            return Vec::new();
        }
        let count =
            ((self.alpha_max - self.alpha_min) / self.alpha_step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|k| self.alpha_min + k as f64 * self.alpha_step)
            .collect()
    }

    /// Text that [`SweepConfig::from_text`] maps back to `self`.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        put("family", self.family.to_string());
        put("lambda", format!("{:?}", self.lambda));
        put("alpha-min", format!("{:?}", self.alpha_min));
        put("alpha-max", format!("{:?}", self.alpha_max));
        put("alpha-step", format!("{:?}", self.alpha_step));
        put("panel-n", self.panel_n.to_string());
        put("tol", format!("{:?}", self.tol));
        if let Some(l) = self.domain_l {
            put("domain-L", format!("{l:?}"));
        }
        put("format", self.format.to_string());
        if let Some(p) = &self.out {
            put("out", p.display().to_string());
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_and_applies() {
        let text = "# window run\nfamily = window\nlambda=0.3\n\n  alpha-max = 8 \nformat=json\nout = r.json\ndomain-L = 24\n";
        let cfg = SweepConfig::from_text(text).unwrap();
        assert_eq!(cfg.family, Family::Window);
        assert_eq!(cfg.lambda, 0.3);
        assert_eq!(cfg.alpha_max, 8.0);
        assert_eq!(cfg.format, Format::Json);
        assert_eq!(cfg.out, Some(PathBuf::from("r.json")));
        assert_eq!(cfg.domain_l, Some(24.0));
        assert_eq!(cfg.alphas(), vec![4.0, 5.0, 6.0, 7.0, 8.0]);
    }

    #[test]
    fn rejects_malformed() {
        assert!(parse_config("lambda 0.3").is_err());
        assert!(parse_config("=3").is_err());
        for bad in [
            "colour = red",
            "lambda = x",
            "tol = 0",
            "tol = 1",
            "alpha-step = 0",
            "alpha-min = -1",
            "panel-n = 0",
            "format = xml",
            "family = airy",
            "domain-L = -2",
            "lambda = inf",
        ] {
            assert!(SweepConfig::from_text(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn default_alphas() {
        let a = SweepConfig::default().alphas();
        assert_eq!(a, (4..=12).map(f64::from).collect::<Vec<_>>());
    }

    #[test]
    fn empty_sweep() {
        let cfg = SweepConfig::from_text("alpha-min = 5\nalpha-max = 4").unwrap();
        assert!(cfg.alphas().is_empty());
    }

    #[test]
    fn fractional_step_reaches_max() {
        let cfg = SweepConfig::from_text("alpha-min = 1\nalpha-max = 2\nalpha-step = 0.1").unwrap();
        assert_eq!(cfg.alphas().len(), 11);
    }

    fn line() -> impl Strategy<Value = String> {
        let key = prop_oneof![
            proptest::sample::select(KEYS.to_vec()).prop_map(String::from),
            "[a-zA-Z#= -]{0,6}",
        ];
        let value = prop_oneof![
            "-?[0-9]{1,3}(\\.[0-9]{0,3})?(e-?[0-9]{1,3})?",
            proptest::sample::select(vec!["toda", "WINDOW", "csv", "json", "nan", "inf", ""])
                .prop_map(String::from),
            "[ -~]{0,8}",
        ];
        (key, value, "[ \t]{0,2}").prop_map(|(k, v, pad)| format!("{pad}{k}{pad}={pad}{v}"))
    }

    proptest! {
        #[test]
        fn accepted_text_round_trips(lines in proptest::collection::vec(line(), 0..8)) {
            let text = lines.join("\n");
            if let Ok(pairs) = parse_config(&text) {
                for (k, _) in &pairs {
                    prop_assert!(!k.is_empty() && !k.contains('='));
                }
            }
            if let Ok(cfg) = SweepConfig::from_text(&text) {
                prop_assert_eq!(SweepConfig::from_text(&cfg.to_config_text()).unwrap(), cfg.clone());
                let a = cfg.alphas();
                prop_assert!(a.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(a.iter().all(|&x| x > 0.0));
            }
        }

        #[test]
        fn round_trip(
            lambda in -0.1f64..2.0,
            amin in 0.5f64..10.0,
            span in 0.0f64..10.0,
            step in 0.1f64..3.0,
            n in 1usize..100,
            tol in 1e-14f64..0.5,
            l in proptest::option::of(1.0f64..100.0),
            json in any::<bool>(),
            window in any::<bool>(),
        ) {
            let cfg = SweepConfig {
                family: if window { Family::Window } else { Family::Toda },
                lambda,
                alpha_min: amin,
                alpha_max: amin + span,
                alpha_step: step,
                panel_n: n,
                tol,
                domain_l: l,
                format: if json { Format::Json } else { Format::Csv },
                out: Some(PathBuf::from("x.csv")),
            };
            prop_assert_eq!(SweepConfig::from_text(&cfg.to_config_text()).unwrap(), cfg);
        }
    }
}
