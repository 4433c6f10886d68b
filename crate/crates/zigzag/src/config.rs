//! Run configuration: defaults, a `key=value` file format mirroring the
//! command-line flags, and a canonical text form.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use zigzag_core::potential::PotentialModel;
use zigzag_core::Complex64;

use crate::output::ComplexJson;
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    /// Potential descriptor, e.g. `gaussian:1` or `beta:2.5`.
    pub potential: String,
    /// Extra scale applied on top of the descriptor.
    pub sigma: f64,
    pub re_min: Option<f64>,
    pub re_max: f64,
    pub im_max: Option<f64>,
    /// Relative tolerance of the quadrature behind `psi`.
    pub tol: f64,
    /// Refreshment rate for perturbation arrows.
    pub eps: Option<f64>,
    #[serde(serialize_with = "serialize_gamma")]
    pub gamma: Option<Complex64>,
    /// Half-width and step of the eigenfunction table.
    pub x_max: f64,
    pub dx: f64,
    /// Simulation horizon.
    #[serde(rename = "T")]
    pub horizon: f64,
    pub seed: u64,
    pub chains: usize,
    pub x0: f64,
    pub max_lag: f64,
    pub bins: usize,
    pub out: Option<String>,
    pub plot: Option<String>,
    pub csv: Option<String>,
}

fn serialize_gamma<S: serde::Serializer>(g: &Option<Complex64>, s: S) -> Result<S::Ok, S::Error> {
    g.map(ComplexJson::from).serialize(s)
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            potential: "gaussian:1".into(),
            sigma: 1.0,
            re_min: None,
            re_max: 0.1,
            im_max: None,
            tol: 1e-10,
            eps: None,
            gamma: None,
            x_max: 4.0,
            dx: 0.01,
            horizon: 1e5,
            seed: 1,
            chains: 1,
            x0: 0.0,
            max_lag: 8.0,
            bins: 50,
            out: None,
            plot: None,
            csv: None,
        }
    }
}

/// Keys in canonical order.
pub const KEYS: [&str; 19] = [
    "potential",
    "sigma",
    "re-min",
    "re-max",
    "im-max",
    "tol",
    "eps",
    "gamma",
    "x-max",
    "dx",
    "T",
    "seed",
    "chains",
    "x0",
    "max-lag",
    "bins",
    "out",
    "plot",
    "csv",
];

fn usage(msg: String) -> CliError {
    CliError::Usage(msg)
}

fn number(key: &str, value: &str) -> Result<f64, CliError> {
    value.trim().parse::<f64>().map_err(|_| usage(format!("{key}: invalid number `{value}`")))
}

fn integer<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.trim().parse::<T>().map_err(|_| usage(format!("{key}: invalid integer `{value}`")))
}

/// Parses `a+bi`, `a-bi`, `a`, `bi` (also with `j`).
pub fn parse_complex(s: &str) -> Result<Complex64, CliError> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || usage(format!("invalid complex number `{s}`"));
    if t.is_empty() {
        return Err(bad());
    }
    let Some(body) = t.strip_suffix(['i', 'j']) else {
        return Ok(Complex64::new(t.parse().map_err(|_| bad())?, 0.0));
    };
    // split at the last sign that is not a leading sign or an exponent sign
    let bytes = body.as_bytes();
    let cut = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |s: &str| match s {
        "" | "+" => Ok(1.0),
        "-" => Ok(-1.0),
        s => s.parse::<f64>().map_err(|_| bad()),
    };
    match cut {
        Some(k) => Ok(Complex64::new(body[..k].parse().map_err(|_| bad())?, imag(&body[k..])?)),
        None => Ok(Complex64::new(0.0, imag(body)?)),
    }
}

pub fn format_complex(z: Complex64) -> String {
    if z.im.is_sign_negative() {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        let path = || (!v.is_empty()).then(|| v.to_string());
        match key.trim() {
            "potential" => self.potential = v.to_string(),
            "sigma" => self.sigma = number(key, v)?,
            "re-min" => self.re_min = Some(number(key, v)?),
            "re-max" => self.re_max = number(key, v)?,
            "im-max" => self.im_max = Some(number(key, v)?),
            "tol" => self.tol = number(key, v)?,
            "eps" => self.eps = Some(number(key, v)?),
            "gamma" => self.gamma = Some(parse_complex(v)?),
            "x-max" => self.x_max = number(key, v)?,
            "dx" => self.dx = number(key, v)?,
            "T" => self.horizon = number(key, v)?,
            "seed" => self.seed = integer(key, v)?,
            "chains" => self.chains = integer(key, v)?,
            "x0" => self.x0 = number(key, v)?,
            "max-lag" => self.max_lag = number(key, v)?,
            "bins" => self.bins = integer(key, v)?,
            "out" => self.out = path(),
            "plot" => self.plot = path(),
            "csv" => self.csv = path(),
            other => return Err(usage(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("line {}: expected key=value, got `{line}`", n + 1)))?;
            self.set(k, v).map_err(|e| match e {
                CliError::Usage(m) => usage(format!("line {}: {m}", n + 1)),
                e => e,
            })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    fn value(&self, key: &str) -> Option<String> {
        let f = |x: f64| Some(x.to_string());
        match key {
            "potential" => Some(self.potential.clone()),
            "sigma" => f(self.sigma),
            "re-min" => self.re_min.and_then(f),
            "re-max" => f(self.re_max),
            "im-max" => self.im_max.and_then(f),
            "tol" => f(self.tol),
            "eps" => self.eps.and_then(f),
            "gamma" => self.gamma.map(format_complex),
            "x-max" => f(self.x_max),
            "dx" => f(self.dx),
            "T" => f(self.horizon),
            "seed" => Some(self.seed.to_string()),
            "chains" => Some(self.chains.to_string()),
            "x0" => f(self.x0),
            "max-lag" => f(self.max_lag),
            "bins" => Some(self.bins.to_string()),
            "out" => self.out.clone(),
            "plot" => self.plot.clone(),
            "csv" => self.csv.clone(),
            _ => None,
        }
    }

    /// Every set key in canonical order, one `key=value` per line.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            if let Some(v) = self.value(key) {
                let _ = writeln!(s, "{key}={v}");
            }
        }
        s
    }

    /// The potential with the extra scale applied.
    pub fn model(&self) -> Result<PotentialModel, CliError> {
        let base: PotentialModel = self.potential.parse().map_err(|e| usage(format!("--potential: {e}")))?;
        if self.sigma == 1.0 {
            return Ok(base);
        }
        base.scale(self.sigma).map_err(|e| usage(format!("--sigma: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model()?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(usage(format!("--{name} must be positive, got {v}")))
            }
        };
        positive("tol", self.tol)?;
        positive("x-max", self.x_max)?;
        positive("dx", self.dx)?;
        positive("T", self.horizon)?;
        positive("max-lag", self.max_lag)?;
        if let Some(eps) = self.eps {
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(usage(format!("--eps must be non-negative, got {eps}")));
            }
        }
        if self.chains == 0 {
            return Err(usage("--chains must be at least 1".into()));
        }
        if self.bins < 10 {
            return Err(usage(format!("--bins must be at least 10, got {}", self.bins)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        let c = Complex64::new;
        assert_eq!(parse_complex("-0.425665+1.02295i").unwrap(), c(-0.425665, 1.02295));
        assert_eq!(parse_complex("1.5-2i").unwrap(), c(1.5, -2.0));
        assert_eq!(parse_complex("-3").unwrap(), c(-3.0, 0.0));
        assert_eq!(parse_complex("2i").unwrap(), c(0.0, 2.0));
        assert_eq!(parse_complex("-i").unwrap(), c(0.0, -1.0));
        assert_eq!(parse_complex("1e-3+2.5e+1j").unwrap(), c(1e-3, 25.0));
        assert_eq!(parse_complex(" 1 - 2 i ").unwrap(), c(1.0, -2.0));
        assert!(parse_complex("abc").is_err());
        assert!(parse_complex("").is_err());
    }

    #[test]
    fn file_and_flags() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# spectrum run\npotential = beta:2.5\nre-min=-2\n\neps=0.05 # arrows\n").unwrap();
        assert_eq!(cfg.potential, "beta:2.5");
        assert_eq!(cfg.re_min, Some(-2.0));
        assert_eq!(cfg.eps, Some(0.05));
        assert!(cfg.apply_text("bogus=1").is_err());
        assert!(cfg.apply_text("sigma").is_err());
        assert!(cfg.apply_text("seed=-1").is_err());
    }

    #[test]
    fn canonical_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("potential=gaussian:1\nsigma=2\ngamma=-0.4+1.1i\nT=1e6\nseed=7\nplot=a.svg\nim-max=3.25")
            .unwrap();
        let text = cfg.canonical();
        let mut again = RunConfig::default();
        again.apply_text(&text).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.canonical(), text);
        assert!(RunConfig::default().canonical().starts_with("potential=gaussian:1\nsigma=1\n"));
    }

    #[test]
    fn validation() {
        assert!(RunConfig::default().validate().is_ok());
        let bad =
            [("potential", "cauchy:1"), ("tol", "0"), ("T", "-1"), ("bins", "3"), ("chains", "0"), ("eps", "-0.1")];
        for (k, v) in bad {
            let mut cfg = RunConfig::default();
            cfg.set(k, v).unwrap();
            assert!(cfg.validate().is_err(), "{k}={v}");
        }
    }
}
