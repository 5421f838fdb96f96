//! Plain-text run configuration: one `key = value` per line, `#` starts a
//! comment. Model coefficients accept integers, decimals and fractions such as
//! `15/2` and are kept as exact rationals.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use num::bigint::BigInt;
use num::rational::BigRational;
use num::traits::{One, Pow, Zero};

use crate::continuation::{ContinuationSettings, DiagramSettings};
use crate::discretization::ActiveParam;
use crate::error::{Error, Result};
use crate::evolve::EvolveSettings;
use crate::model::{preset, ratio, ExactParams, ModelParams, Params};

const MODEL_KEYS: [&str; 13] = [
    "r1", "r2", "a1", "a2", "b1", "b2", "d1", "d2", "d", "d11", "d22", "d12", "d21",
];

const OTHER_KEYS: [&str; 33] = [
    "preset",
    "nodes",
    "param",
    "param_min",
    "param_max",
    "k_min",
    "k_max",
    "newton_tol",
    "newton_max_iter",
    "ds0",
    "ds_min",
    "ds_max",
    "max_steps",
    "switch_epsilon",
    "detect_hopf",
    "max_primary",
    "depth",
    "max_secondary",
    "allow_negative_d",
    "sweep_param",
    "sweep_values",
    "initial",
    "initial_mode",
    "initial_amplitude",
    "initial_file",
    "dt0",
    "dt_max",
    "evolve_max_steps",
    "steady_tol",
    "out",
    "seed",
    "workers",
    "strict",
];

/// Initial data for time integration.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialData {
    /// Coexistence state plus `amplitude · cos(kπx)` in both components.
    Mode { k: usize, amplitude: f64 },
    /// Coexistence state plus seeded uniform noise of relative size `amplitude`.
    Random { amplitude: f64 },
    /// Profile CSV with columns `x,u,v`.
    File(PathBuf),
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub preset: Option<u8>,
    pub params: ExactParams,
    pub nodes: usize,
    pub param: ActiveParam,
    pub range: (f64, f64),
    /// Inclusive mode range for the linear analysis.
    pub modes: (usize, usize),
    pub diagram: DiagramSettings,
    pub evolve: EvolveSettings,
    pub sweep_param: ActiveParam,
    pub sweep_values: Vec<f64>,
    pub initial: InitialData,
    pub out: PathBuf,
    pub seed: u64,
    /// Worker threads for sweeps; `0` uses every logical core.
    pub workers: usize,
    pub strict: bool,
    /// Keys that were not given and took their default.
    pub defaulted: Vec<String>,
}

impl RunConfig {
    pub fn model(&self) -> ModelParams {
        self.params.to_f64()
    }

    pub fn allow_negative_d(&self) -> bool {
        self.diagram.continuation.allow_negative_d
    }

    /// Reads a config file. `preset` (e.g. from the command line) replaces the
    /// file's `preset` key; explicit coefficients in the file override it.
    pub fn from_file(path: &Path, preset: Option<u8>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, preset)
    }

    /// Defaults for a bundled preset.
    pub fn from_preset(index: u8) -> Result<Self> {
        Self::parse("", Some(index))
    }

    pub fn parse(text: &str, preset_override: Option<u8>) -> Result<Self> {
        let mut entries = Entries::read(text)?;
        let preset_index = match preset_override {
            Some(i) => {
                entries.take("preset");
                Some(i)
            }
            None => entries.parse_opt::<u8>("preset")?,
        };
        let mut params = match preset_index {
            Some(i) => preset(i).ok_or_else(|| Error::Config {
                line: entries.line_of("preset"),
                message: format!("unknown preset {i}; expected 1..4"),
            })?,
            None => {
                let missing: Vec<&str> = ["r1", "r2", "a1", "a2", "b1", "b2"]
                    .into_iter()
                    .filter(|k| !entries.has(k))
                    .collect();
                if !missing.is_empty() {
                    return Err(Error::Config {
                        line: 0,
                        message: format!("no preset given and missing {}", missing.join(", ")),
                    });
                }
                Params {
                    r1: BigRational::zero(),
                    r2: BigRational::zero(),
                    a1: BigRational::zero(),
                    a2: BigRational::zero(),
                    b1: BigRational::zero(),
                    b2: BigRational::zero(),
                    d1: ratio(1, 20),
                    d2: ratio(1, 20),
                    d11: BigRational::zero(),
                    d22: BigRational::zero(),
                    d12: BigRational::zero(),
                    d21: BigRational::zero(),
                }
            }
        };
        if entries.has("d") && (entries.has("d1") || entries.has("d2")) {
            return Err(Error::Config {
                line: entries.line_of("d"),
                message: "give either d or d1/d2, not both".into(),
            });
        }
        for key in MODEL_KEYS {
            if let Some((line, raw)) = entries.take(key) {
                let x = parse_rational(&raw).ok_or_else(|| Error::Config {
                    line,
                    message: format!("{key}: not a number: {raw:?}"),
                })?;
                match key {
                    "r1" => params.r1 = x,
                    "r2" => params.r2 = x,
                    "a1" => params.a1 = x,
                    "a2" => params.a2 = x,
                    "b1" => params.b1 = x,
                    "b2" => params.b2 = x,
                    "d1" => params.d1 = x,
                    "d2" => params.d2 = x,
                    "d" => params = params.with_d(x),
                    "d11" => params.d11 = x,
                    "d22" => params.d22 = x,
                    "d12" => params.d12 = x,
                    _ => params.d21 = x,
                }
            }
        }

        let mut e = entries;
        let param = e.parse_with("param", ActiveParam::D, ActiveParam::parse)?;
        let default_range = match param {
            ActiveParam::D => Some((0.005, 0.05)),
            ActiveParam::R1 => Some((2.0, 7.6)),
            _ => None,
        };
        let range = match (e.parse_opt::<f64>("param_min")?, e.parse_opt::<f64>("param_max")?, default_range) {
            (Some(lo), Some(hi), _) => (lo, hi),
            (None, None, Some(r)) => {
                e.defaulted.push("param_min/param_max".into());
                r
            }
            _ => {
                return Err(Error::Config {
                    line: 0,
                    message: format!("param = {param} needs both param_min and param_max"),
                })
            }
        };
        if !(range.0 < range.1) {
            return Err(Error::Config {
                line: e.line_of("param_min"),
                message: "param_min must be below param_max".into(),
            });
        }

        let nodes = e.parse_or("nodes", 201usize)?;
        let modes = (e.parse_or("k_min", 0usize)?, e.parse_or("k_max", 20usize)?);
        if modes.0 > modes.1 {
            return Err(Error::Config {
                line: e.line_of("k_min"),
                message: "k_min must not exceed k_max".into(),
            });
        }

        let cd = ContinuationSettings::default();
        let mut cs = ContinuationSettings {
            ds0: e.parse_or("ds0", cd.ds0)?,
            ds_min: e.parse_or("ds_min", cd.ds_min)?,
            ds_max: e.parse_or("ds_max", cd.ds_max)?,
            max_steps: e.parse_or("max_steps", cd.max_steps)?,
            switch_epsilon: e.parse_or("switch_epsilon", cd.switch_epsilon)?,
            detect_hopf: e.parse_or("detect_hopf", cd.detect_hopf)?,
            allow_negative_d: e.parse_or("allow_negative_d", cd.allow_negative_d)?,
            ..cd
        };
        cs.newton.tol_residual = e.parse_or("newton_tol", cs.newton.tol_residual)?;
        cs.newton.max_iter = e.parse_or("newton_max_iter", cs.newton.max_iter)?;
        let dd = DiagramSettings::default();
        let diagram = DiagramSettings {
            nodes,
            param,
            range,
            continuation: cs,
            max_primary: e.parse_or("max_primary", dd.max_primary)?,
            depth: e.parse_or("depth", dd.depth)?,
            max_secondary_per_branch: e.parse_or("max_secondary", dd.max_secondary_per_branch)?,
        };

        let ed = EvolveSettings::default();
        let evolve = EvolveSettings {
            dt0: e.parse_or("dt0", ed.dt0)?,
            dt_max: e.parse_or("dt_max", ed.dt_max)?,
            max_steps: e.parse_or("evolve_max_steps", ed.max_steps)?,
            steady_tol: e.parse_or("steady_tol", ed.steady_tol)?,
            newton: cs.newton,
            ..ed
        };

        let sweep_param = e.parse_with("sweep_param", ActiveParam::D21, ActiveParam::parse)?;
        let sweep_values = match e.take("sweep_values") {
            Some((line, raw)) => raw
                .split(',')
                .map(|s| {
                    parse_rational(s.trim())
                        .map(|r| crate::model::Scalar::to_f64(&r))
                        .ok_or_else(|| Error::Config {
                            line,
                            message: format!("sweep_values: not a number: {:?}", s.trim()),
                        })
                })
                .collect::<Result<Vec<f64>>>()?,
            None => {
                e.defaulted.push("sweep_values".into());
                Vec::new()
            }
        };

        let kind = e.parse_or("initial", "mode".to_string())?;
        let amplitude = e.parse_or("initial_amplitude", 0.01)?;
        let initial = match kind.as_str() {
            "mode" => InitialData::Mode {
                k: e.parse_or("initial_mode", 1usize)?,
                amplitude,
            },
            "random" => InitialData::Random { amplitude },
            "file" => match e.take("initial_file") {
                Some((_, path)) => InitialData::File(PathBuf::from(path)),
                None => {
                    return Err(Error::Config {
                        line: e.line_of("initial"),
                        message: "initial = file needs initial_file".into(),
                    })
                }
            },
            other => {
                return Err(Error::Config {
                    line: e.line_of("initial"),
                    message: format!("initial must be mode, random or file, got {other:?}"),
                })
            }
        };

        let out = PathBuf::from(e.parse_or("out", "out".to_string())?);
        let seed = e.parse_or("seed", 0u64)?;
        let workers = e.parse_or("workers", 0usize)?;
        let strict = e.parse_or("strict", false)?;

        // Unused keys left over: initial_mode with initial = random, and so on.
        for (key, (line, _)) in &e.map {
            info!("config line {line}: {key} is not used with these settings");
        }
        for key in &e.defaulted {
            info!("config: {key} not given, using the default");
        }
        Ok(RunConfig {
            preset: preset_index,
            params,
            nodes,
            param,
            range,
            modes,
            diagram,
            evolve,
            sweep_param,
            sweep_values,
            initial,
            out,
            seed,
            workers,
            strict,
            defaulted: e.defaulted,
        })
    }
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
    lines: BTreeMap<String, usize>,
    defaulted: Vec<String>,
}

impl Entries {
    fn read(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected key = value, got {content:?}"),
            })?;
            let key = key.trim();
            if !MODEL_KEYS.contains(&key) && !OTHER_KEYS.contains(&key) {
                return Err(Error::Config {
                    line,
                    message: format!("unknown key {key:?}"),
                });
            }
            if let Some((first, _)) = map.get(key) {
                return Err(Error::Config {
                    line,
                    message: format!("{key} already set on line {first}"),
                });
            }
            map.insert(key.to_string(), (line, value.trim().to_string()));
        }
        let lines = map.iter().map(|(k, (l, _))| (k.clone(), *l)).collect();
        Ok(Entries {
            map,
            lines,
            defaulted: Vec::new(),
        })
    }

    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn line_of(&self, key: &str) -> usize {
        self.lines.get(key).copied().unwrap_or(0)
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn parse_with<T>(&mut self, key: &str, default: T, f: impl Fn(&str) -> Option<T>) -> Result<T> {
        match self.take(key) {
            Some((line, raw)) => f(&raw).ok_or_else(|| Error::Config {
                line,
                message: format!("{key}: invalid value {raw:?}"),
            }),
            None => {
                self.defaulted.push(key.to_string());
                Ok(default)
            }
        }
    }

    fn parse_opt<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.take(key) {
            Some((line, raw)) => raw.parse().map(Some).map_err(|_| Error::Config {
                line,
                message: format!("{key}: invalid value {raw:?}"),
            }),
            None => Ok(None),
        }
    }

    fn parse_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        self.parse_with(key, default, |s| s.parse().ok())
    }
}

/// Exact value of `7`, `-0.045`, `1.5e-3` or `15/2`.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        return (!d.is_zero()).then(|| n / d);
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: BigInt = format!("{int}{frac}").parse().ok()?;
    let ten = BigRational::from_integer(BigInt::from(10));
    let scale = exponent - frac.len() as i32;
    let factor = if scale >= 0 {
        Pow::pow(ten, scale as u32)
    } else {
        BigRational::one() / Pow::pow(ten, (-scale) as u32)
    };
    let x = BigRational::from_integer(all) * factor;
    Some(if negative { -x } else { x })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals_are_exact() {
        assert_eq!(parse_rational("15/2"), Some(ratio(15, 2)));
        assert_eq!(parse_rational("0.045"), Some(ratio(45, 1000)));
        assert_eq!(parse_rational("-1.5e-3"), Some(ratio(-3, 2000)));
        assert_eq!(parse_rational("100"), Some(ratio(100, 1)));
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("abc"), None);
        assert_eq!(parse_rational("."), None);
    }

    #[test]
    fn preset_with_overrides() {
        let text = "# first branch study\npreset = 1\nd21 = 0.045   # beyond the threshold\nnodes = 101\nparam_min = 0.002\nparam_max = 0.01\n";
        let c = RunConfig::parse(text, None).unwrap();
        assert_eq!(c.params.d21, ratio(45, 1000));
        assert_eq!(c.params.r1, ratio(5, 1));
        assert_eq!(c.nodes, 101);
        assert_eq!(c.range, (0.002, 0.01));
        assert!(c.defaulted.iter().any(|k| k == "seed"));
    }

    #[test]
    fn command_line_preset_wins() {
        let c = RunConfig::parse("preset = 1\n", Some(3)).unwrap();
        assert_eq!(c.params.d12, ratio(100, 1));
        assert_eq!(c.preset, Some(3));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("preset = 1\n\nbogus = 3\n", 3),
            ("preset = 1\nd12 = three\n", 2),
            ("preset = 1\nnodes 50\n", 2),
            ("preset = 1\nd12 = 1\nd12 = 2\n", 3),
            ("preset = 9\n", 1),
            ("preset = 1\ninitial = sine\n", 2),
        ];
        for (text, line) in cases {
            match RunConfig::parse(text, None) {
                Err(Error::Config { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn explicit_parameters_without_preset() {
        let text = "r1 = 15/2\nr2 = 16/7\na1 = 4\na2 = 2\nb1 = 6\nb2 = 1\nd = 1/20\n";
        let c = RunConfig::parse(text, None).unwrap();
        assert_eq!(c.params, preset(3).unwrap().with_cross(BigRational::zero(), BigRational::zero()));
        assert!(matches!(RunConfig::parse("r1 = 1\n", None), Err(Error::Config { .. })));
    }

    #[test]
    fn other_parameters_need_a_range() {
        assert!(RunConfig::parse("preset = 1\nparam = d21\n", None).is_err());
        let c = RunConfig::parse("preset = 1\nparam = d21\nparam_min = 0\nparam_max = 1\n", None).unwrap();
        assert_eq!(c.param, ActiveParam::D21);
    }

    #[test]
    fn sweep_values_and_initial_data() {
        let c = RunConfig::parse(
            "preset = 2\nsweep_param = d21\nsweep_values = 0, 3, 6, 20, 100\ninitial = random\ninitial_amplitude = 0.05\n",
            None,
        )
        .unwrap();
        assert_eq!(c.sweep_values, vec![0.0, 3.0, 6.0, 20.0, 100.0]);
        assert_eq!(c.initial, InitialData::Random { amplitude: 0.05 });
    }
}
