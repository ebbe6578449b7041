//! Scenario files: `[section]` headers, `key = value` lines, `#` comments.
//!
//! ```text
//! [grid]
//! dim = 1
//! lengths = 1.0
//! cells = 64
//!
//! [params]
//! a = 1
//! b = 1
//! sigma = 2
//!
//! [motility]
//! family = exponential
//! chi = 1
//!
//! [initial]
//! kind = cosine-perturbed      # constant | cosine-perturbed | random-positive | file
//! mean = 1
//! amplitude = 0.3
//!
//! [stepper]                    # optional
//! scheme = explicit-euler
//!
//! [run]
//! t_end = 50
//! observe_every = 0.5
//!
//! [output]                     # optional
//! diagnostics = diagnostics.csv
//! snapshot_prefix = snap
//! snapshot_times = 1, 10
//! ```
//!
//! Relative paths are resolved against the directory of the scenario file.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use chemotaxis_core::stepper::{Parameters, StepperConfig};
use chemotaxis_core::{Args, Error, Grid, MotilitySpec, Result, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::snapshot;

const SECTIONS: [&str; 7] = ["grid", "params", "motility", "initial", "stepper", "run", "output"];
const REQUIRED: [&str; 5] = ["grid", "params", "motility", "initial", "run"];

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug, Clone)]
pub enum InitialSpec {
    Constant { value: f64 },
    CosinePerturbed { mean: f64, amplitude: f64, mode: u64 },
    RandomPositive { mean: f64, amplitude: f64, seed: u64 },
    File { path: PathBuf },
}

impl InitialSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Constant { .. } => "constant",
            Self::CosinePerturbed { .. } => "cosine-perturbed",
            Self::RandomPositive { .. } => "random-positive",
            Self::File { .. } => "file",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct OutputSpec {
    pub diagnostics: Option<PathBuf>,
    pub snapshot_prefix: Option<PathBuf>,
    pub snapshot_times: Vec<f64>,
}

impl OutputSpec {
    pub fn snapshot_path(&self, t: f64) -> Option<PathBuf> {
        let prefix = self.snapshot_prefix.as_ref()?;
        let mut name = prefix.file_name()?.to_os_string();
        name.push(format!("_t{t}.csv"));
        Some(prefix.with_file_name(name))
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub grid: Grid,
    pub params: Parameters,
    pub motility_family: String,
    motility_entries: Vec<Entry>,
    pub initial: InitialSpec,
    pub u0: ScalarField,
    pub stepper: StepperConfig,
    pub t_end: f64,
    pub observe_every: Option<f64>,
    pub output: OutputSpec,
}

fn resolve(base: &Path, raw: &str) -> PathBuf {
    let p = Path::new(raw.trim());
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn to_args(section: &str, entries: &[Entry]) -> Args {
    let mut args = Args::new(section);
    for e in entries {
        args.push(e.key.clone(), e.value.clone(), e.line);
    }
    args
}

fn split_sections(text: &str) -> Result<BTreeMap<String, Vec<Entry>>> {
    let mut sections: BTreeMap<String, Vec<Entry>> = BTreeMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown section [{name}]"),
                });
            }
            if sections.contains_key(name) {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate section [{name}]"),
                });
            }
            sections.insert(name.to_string(), Vec::new());
            current = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Parse {
                line,
                message: format!("expected `key = value`, found `{content}`"),
            });
        };
        let Some(section) = current.as_ref() else {
            return Err(Error::Parse {
                line,
                message: "setting outside of any section".into(),
            });
        };
        let key = key.trim().to_string();
        let entries = sections.get_mut(section).expect("section exists");
        if entries.iter().any(|e| e.key == key) {
            return Err(Error::Parse {
                line,
                message: format!("duplicate key `{key}` in [{section}]"),
            });
        }
        entries.push(Entry {
            key,
            value: value.trim().to_string(),
            line,
        });
    }
    for name in REQUIRED {
        if !sections.contains_key(name) {
            return Err(Error::Parse {
                line: 0,
                message: format!("missing section [{name}]"),
            });
        }
    }
    Ok(sections)
}

fn positive(args: &Args, key: &str, x: f64) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::Parse {
            line: args.line_of(key),
            message: format!("[{}] {key} must be positive, got {x}", args.section()),
        })
    }
}

fn parse_grid(args: &mut Args) -> Result<Grid> {
    if !args.contains("dim") {
        return Err(Error::MissingKey {
            section: "grid".into(),
            key: "dim".into(),
        });
    }
    let dim = args.take_u64_or("dim", 0)?;
    let lengths = args.take_f64_list("lengths")?;
    let cells = args.take_usize_list("cells")?;
    if lengths.len() as u64 != dim || cells.len() as u64 != dim {
        return Err(Error::Parse {
            line: args.line_of("dim"),
            message: format!("dim = {dim} needs {dim} lengths and {dim} cell counts"),
        });
    }
    args.finish()?;
    Grid::new(&lengths, &cells)
}

fn parse_params(args: &mut Args, motility: MotilitySpec) -> Result<Parameters> {
    let a = args.take_f64("a")?;
    let b = args.take_f64("b")?;
    let sigma = args.take_f64("sigma")?;
    args.finish()?;
    Parameters::new(a, b, sigma, motility)
}

fn build_motility(family: &str, entries: &[Entry]) -> Result<MotilitySpec> {
    MotilitySpec::from_registry(family, &mut to_args("motility", entries))
}

fn parse_initial(args: &mut Args, base: &Path) -> Result<InitialSpec> {
    let kind = args.take_str("kind")?;
    let spec = match kind.as_str() {
        "constant" => InitialSpec::Constant {
            value: args.take_f64("value")?,
        },
        "cosine-perturbed" => InitialSpec::CosinePerturbed {
            mean: args.take_f64("mean")?,
            amplitude: args.take_f64("amplitude")?,
            mode: args.take_u64_or("mode", 1)?,
        },
        "random-positive" => InitialSpec::RandomPositive {
            mean: args.take_f64_or("mean", 1.0)?,
            amplitude: args.take_f64_or("amplitude", 0.5)?,
            seed: args.take_u64_or("seed", 0)?,
        },
        "file" => {
            let path = resolve(base, &args.take_str("path")?);
            if !path.is_file() {
                return Err(Error::Parse {
                    line: args.line_of("path"),
                    message: format!("initial data file {} does not exist", path.display()),
                });
            }
            InitialSpec::File { path }
        }
        other => {
            return Err(Error::Parse {
                line: args.line_of("kind"),
                message: format!(
                    "unknown initial kind `{other}` (known: constant, cosine-perturbed, random-positive, file)"
                ),
            })
        }
    };
    args.finish()?;
    Ok(spec)
}

/// Nodal initial data on `grid`.
pub fn initial_field(spec: &InitialSpec, grid: Grid) -> Result<ScalarField> {
    let u0 = match spec {
        InitialSpec::Constant { value } => ScalarField::constant(grid, *value),
        InitialSpec::CosinePerturbed { mean, amplitude, mode } => {
            let (dim, lengths) = (grid.dim(), [grid.lengths()[0], grid.lengths().get(1).copied().unwrap_or(1.0)]);
            let k = *mode as f64;
            ScalarField::from_fn(grid, |x| {
                mean + amplitude * (0..dim).map(|a| (PI * k * x[a] / lengths[a]).cos()).product::<f64>()
            })
        }
        InitialSpec::RandomPositive { mean, amplitude, seed } => {
            if !(*mean > 0.0 && (0.0..1.0).contains(amplitude)) {
                return Err(Error::param("initial", "random-positive needs mean > 0 and 0 <= amplitude < 1"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let values = (0..grid.len())
                .map(|_| mean * (1.0 + amplitude * rng.gen_range(-1.0..=1.0)))
                .collect();
            ScalarField::new(grid, values)?
        }
        InitialSpec::File { path } => snapshot::read_u(path, grid)?,
    };
    if u0.min() < 0.0 {
        return Err(Error::InvalidField("initial data must be nonnegative".into()));
    }
    if u0.max() <= 0.0 {
        return Err(Error::InvalidField("initial data must not vanish identically".into()));
    }
    Ok(u0)
}

fn parse_stepper(args: &mut Args) -> Result<StepperConfig> {
    let defaults = StepperConfig::default();
    let scheme = args.take_opt_str("scheme").unwrap_or(defaults.scheme.clone());
    let cfg = StepperConfig {
        scheme,
        cfl_safety: args.take_f64_or("cfl_safety", defaults.cfl_safety)?,
        dt_max: args.take_f64_or("dt_max", defaults.dt_max)?,
        blowup_threshold: args.take_f64_or("blowup_threshold", defaults.blowup_threshold)?,
    };
    args.finish()?;
    cfg.validate()?;
    if !chemotaxis_core::stepper::schemes().contains(&cfg.scheme) {
        return Err(Error::Parse {
            line: args.line_of("scheme"),
            message: format!(
                "unknown scheme `{}` (known: {})",
                cfg.scheme,
                chemotaxis_core::stepper::schemes().names().collect::<Vec<_>>().join(", ")
            ),
        });
    }
    Ok(cfg)
}

fn parse_output(args: &mut Args, base: &Path) -> Result<OutputSpec> {
    let out = OutputSpec {
        diagnostics: args.take_opt_str("diagnostics").map(|p| resolve(base, &p)),
        snapshot_prefix: args.take_opt_str("snapshot_prefix").map(|p| resolve(base, &p)),
        snapshot_times: if args.contains("snapshot_times") {
            args.take_f64_list("snapshot_times")?
        } else {
            Vec::new()
        },
    };
    args.finish()?;
    if !out.snapshot_times.is_empty() && out.snapshot_prefix.is_none() {
        return Err(Error::MissingKey {
            section: "output".into(),
            key: "snapshot_prefix".into(),
        });
    }
    if let Some(&t) = out.snapshot_times.iter().find(|t| !(**t >= 0.0)) {
        return Err(Error::Parse {
            line: args.line_of("snapshot_times"),
            message: format!("snapshot time {t} is negative"),
        });
    }
    Ok(out)
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut sections = split_sections(text)?;
        let mut section = |name: &str| to_args(name, &sections.remove(name).unwrap_or_default());

        let grid = parse_grid(&mut section("grid"))?;

        let mut motility_entries = sections.remove("motility").unwrap_or_default();
        let family_at = motility_entries
            .iter()
            .position(|e| e.key == "family")
            .ok_or_else(|| Error::MissingKey {
                section: "motility".into(),
                key: "family".into(),
            })?;
        let motility_family = motility_entries.remove(family_at).value;
        for e in motility_entries.iter_mut().filter(|e| e.key == "table") {
            e.value = resolve(base, &e.value).to_string_lossy().into_owned();
        }
        let motility = build_motility(&motility_family, &motility_entries)?;

        let mut section = |name: &str| to_args(name, &sections.remove(name).unwrap_or_default());
        let params = parse_params(&mut section("params"), motility)?;
        let initial = parse_initial(&mut section("initial"), base)?;
        let u0 = initial_field(&initial, grid)?;
        let stepper = parse_stepper(&mut section("stepper"))?;

        let mut run = section("run");
        let t_end = run.take_f64("t_end")?;
        if !(t_end.is_finite() && t_end >= 0.0) {
            return Err(Error::Parse {
                line: run.line_of("t_end"),
                message: format!("[run] t_end must be nonnegative, got {t_end}"),
            });
        }
        let observe_every = if run.contains("observe_every") {
            let every = run.take_f64("observe_every")?;
            Some(positive(&run, "observe_every", every)?)
        } else {
            None
        };
        run.finish()?;
        let output = parse_output(&mut section("output"), base)?;

        Ok(Self {
            grid,
            params,
            motility_family,
            motility_entries,
            initial,
            u0,
            stepper,
            t_end,
            observe_every,
            output,
        })
    }

    /// Names accepted by [`Self::with_parameter`] for this configuration.
    pub fn sweepable(&self) -> Vec<String> {
        let mut names = vec!["a".to_string(), "b".into(), "sigma".into()];
        names.extend(self.motility_entries.iter().filter(|e| e.key != "table").map(|e| e.key.clone()));
        names
    }

    /// Copy with one model or motility parameter replaced.
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<Self> {
        let mut next = self.clone();
        match name {
            "a" => next.params.a = value,
            "b" => next.params.b = value,
            "sigma" => next.params.sigma = value,
            _ => {
                let entry = next
                    .motility_entries
                    .iter_mut()
                    .find(|e| e.key == name && e.key != "table")
                    .ok_or_else(|| {
                        Error::param(
                            name,
                            format!("not sweepable here (choose from: {})", self.sweepable().join(", ")),
                        )
                    })?;
                entry.value = value.to_string();
                next.params.motility = build_motility(&next.motility_family, &next.motility_entries)?;
            }
        }
        next.params.validate()?;
        Ok(next)
    }
}
