//! Flat `key = value` experiment configurations.
//!
//! The format is line-oriented: one assignment per line, `#` starts a
//! comment, blank lines are skipped. Every key has a default except
//! `pipeline`, which must name at least one pipeline to run. Parse errors
//! carry the line number and the field they refer to.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use borderlab::geometry::GraphFn;
use borderlab::operator::EllipticOperatorField;
use borderlab::rhs::RhsPreset;
use borderlab::ConvexDomain;

#[derive(Debug)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "line {n} ({}): {}", self.field, self.message),
            None => write!(f, "({}): {}", self.field, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: Option<usize>, field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { line, field: field.to_string(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Pipeline {
    Solve,
    Barriers,
    Differentiability,
    LogLip,
    LorentzAudit,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Solve => "solve",
            Pipeline::Barriers => "barriers",
            Pipeline::Differentiability => "differentiability",
            Pipeline::LogLip => "loglip",
            Pipeline::LorentzAudit => "lorentz-audit",
        }
    }
}

/// Right-hand side: either a library preset or a sampled grid file in the
/// `solve.csv` column layout.
#[derive(Debug, Clone)]
pub enum RhsSpec {
    Preset(RhsPreset),
    File(PathBuf),
}

impl RhsSpec {
    pub fn describe(&self) -> String {
        match self {
            RhsSpec::Preset(RhsPreset::Zero) => "zero".into(),
            RhsSpec::Preset(RhsPreset::Constant { value }) => format!("constant({value})"),
            RhsSpec::Preset(RhsPreset::ManufacturedQuadratic) => "manufactured".into(),
            RhsSpec::Preset(RhsPreset::ManufacturedQuartic) => "quartic".into(),
            RhsSpec::Preset(RhsPreset::GBeta { beta }) => format!("g_beta({beta})"),
            RhsSpec::File(p) => format!("file({})", p.display()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dim: usize,
    pub domain: ConvexDomain,
    pub operator: EllipticOperatorField,
    pub rhs: RhsSpec,
    /// Grid spacing on the unit box; `1/h` must be an integer.
    pub h: f64,
    pub nodes_half: usize,
    pub q: f64,
    pub lambda_big: f64,
    /// Scale depth `J` of the differentiability ladder.
    pub levels: usize,
    /// Dyadic ratio of the Log-Lipschitz induction.
    pub rho: f64,
    /// Induction depth of the Log-Lipschitz pipeline.
    pub steps: usize,
    pub seed: u64,
    /// Batch size of the barrier certification sweep.
    pub seeds: usize,
    pub loc_cap: usize,
    pub cascade_levels: usize,
    pub tol: f64,
    /// Deduplicated, in dependency order.
    pub pipelines: Vec<Pipeline>,
    /// Output directory, joined under the output root.
    pub output: PathBuf,
}

impl ExperimentConfig {
    fn with_defaults(dim: usize) -> ExperimentConfig {
        ExperimentConfig {
            dim,
            domain: ConvexDomain::HalfSpace,
            operator: EllipticOperatorField::Identity,
            rhs: RhsSpec::Preset(RhsPreset::ManufacturedQuadratic),
            h: 1.0 / 64.0,
            nodes_half: 64,
            q: dim as f64,
            lambda_big: 4.0,
            levels: 8,
            rho: 0.5,
            steps: 8,
            seed: 1,
            seeds: 8,
            loc_cap: 320,
            cascade_levels: 8,
            tol: 1e-10,
            pipelines: Vec::new(),
            output: PathBuf::from("borderlab-out"),
        }
    }

    pub fn domain_describe(&self) -> String {
        match &self.domain {
            ConvexDomain::HalfSpace => "half_space".into(),
            ConvexDomain::Cone { slope } => format!("cone({slope})"),
            ConvexDomain::Graph { graph: GraphFn::PowerAbs { coef, exponent } } => {
                format!("graph({coef}, {exponent})")
            }
            ConvexDomain::Graph { graph: GraphFn::MaxAffine { slope, offset } } => {
                format!("max_affine({slope}, {offset})")
            }
            other => format!("{other:?}"),
        }
    }

    pub fn operator_describe(&self) -> String {
        match &self.operator {
            EllipticOperatorField::Identity => "identity".into(),
            EllipticOperatorField::SmoothAnisotropic { lambda } => format!("smooth({lambda})"),
            EllipticOperatorField::Checkerboard { lambda, size } => {
                format!("checker({lambda}, {size})")
            }
            EllipticOperatorField::RandomCells { lambda, size, .. } => {
                format!("random_cells({lambda}, {size})")
            }
            other => format!("{other:?}"),
        }
    }

    /// Resolved key/value echo for the manifest.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("n".into(), self.dim.to_string());
        m.insert("domain".into(), self.domain_describe());
        m.insert("operator".into(), self.operator_describe());
        m.insert("rhs".into(), self.rhs.describe());
        m.insert("h".into(), format!("{:e}", self.h));
        m.insert("q".into(), self.q.to_string());
        m.insert("lambda_big".into(), self.lambda_big.to_string());
        m.insert("levels".into(), self.levels.to_string());
        m.insert("rho".into(), self.rho.to_string());
        m.insert("steps".into(), self.steps.to_string());
        m.insert("seed".into(), self.seed.to_string());
        m.insert("seeds".into(), self.seeds.to_string());
        m.insert("loc_cap".into(), self.loc_cap.to_string());
        m.insert("cascade_levels".into(), self.cascade_levels.to_string());
        m.insert("tol".into(), format!("{:e}", self.tol));
        m.insert(
            "pipeline".into(),
            self.pipelines.iter().map(|p| p.name()).collect::<Vec<_>>().join(", "),
        );
        m.insert("output".into(), self.output.display().to_string());
        m
    }
}

/// Split `name(arg1, arg2)` into the name and its argument list; a bare
/// `name` has no arguments.
fn split_call<'a>(
    value: &'a str,
    line: usize,
    field: &str,
) -> Result<(&'a str, Vec<&'a str>), ConfigError> {
    let value = value.trim();
    match value.find('(') {
        None => Ok((value, Vec::new())),
        Some(open) => {
            if !value.ends_with(')') {
                return Err(err(Some(line), field, format!("unbalanced parentheses in {value:?}")));
            }
            let name = value[..open].trim();
            let inner = &value[open + 1..value.len() - 1];
            let args = if inner.trim().is_empty() {
                Vec::new()
            } else {
                inner.split(',').map(str::trim).collect()
            };
            Ok((name, args))
        }
    }
}

fn parse_f64(s: &str, line: usize, field: &str) -> Result<f64, ConfigError> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| err(Some(line), field, format!("expected a number, got {s:?}")))
}

fn parse_usize(s: &str, line: usize, field: &str) -> Result<usize, ConfigError> {
    s.trim()
        .parse::<usize>()
        .map_err(|_| err(Some(line), field, format!("expected a nonnegative integer, got {s:?}")))
}

fn arity(
    args: &[&str],
    want: usize,
    line: usize,
    field: &str,
    name: &str,
) -> Result<(), ConfigError> {
    if args.len() != want {
        return Err(err(
            Some(line),
            field,
            format!("{name} takes {want} argument(s), got {}", args.len()),
        ));
    }
    Ok(())
}

fn parse_domain(value: &str, line: usize) -> Result<ConvexDomain, ConfigError> {
    let (name, args) = split_call(value, line, "domain")?;
    match name {
        "half_space" => {
            arity(&args, 0, line, "domain", name)?;
            Ok(ConvexDomain::HalfSpace)
        }
        "cone" => {
            arity(&args, 1, line, "domain", name)?;
            Ok(ConvexDomain::Cone { slope: parse_f64(args[0], line, "domain")? })
        }
        "graph" => {
            arity(&args, 2, line, "domain", name)?;
            Ok(ConvexDomain::Graph {
                graph: GraphFn::PowerAbs {
                    coef: parse_f64(args[0], line, "domain")?,
                    exponent: parse_f64(args[1], line, "domain")?,
                },
            })
        }
        "max_affine" => {
            arity(&args, 2, line, "domain", name)?;
            Ok(ConvexDomain::Graph {
                graph: GraphFn::MaxAffine {
                    slope: parse_f64(args[0], line, "domain")?,
                    offset: parse_f64(args[1], line, "domain")?,
                },
            })
        }
        other => Err(err(Some(line), "domain", format!("unknown domain preset {other:?}"))),
    }
}

fn parse_operator(value: &str, line: usize, seed: u64) -> Result<EllipticOperatorField, ConfigError> {
    let (name, args) = split_call(value, line, "operator")?;
    match name {
        "identity" => {
            arity(&args, 0, line, "operator", name)?;
            Ok(EllipticOperatorField::Identity)
        }
        "smooth" => {
            arity(&args, 1, line, "operator", name)?;
            Ok(EllipticOperatorField::SmoothAnisotropic {
                lambda: parse_f64(args[0], line, "operator")?,
            })
        }
        "checker" => {
            arity(&args, 2, line, "operator", name)?;
            Ok(EllipticOperatorField::Checkerboard {
                lambda: parse_f64(args[0], line, "operator")?,
                size: parse_f64(args[1], line, "operator")?,
            })
        }
        "random_cells" => {
            arity(&args, 2, line, "operator", name)?;
            Ok(EllipticOperatorField::RandomCells {
                lambda: parse_f64(args[0], line, "operator")?,
                size: parse_f64(args[1], line, "operator")?,
                seed,
            })
        }
        other => Err(err(Some(line), "operator", format!("unknown operator preset {other:?}"))),
    }
}

fn parse_rhs(value: &str, line: usize) -> Result<RhsSpec, ConfigError> {
    let (name, args) = split_call(value, line, "rhs")?;
    match name {
        "zero" => {
            arity(&args, 0, line, "rhs", name)?;
            Ok(RhsSpec::Preset(RhsPreset::Zero))
        }
        "constant" => {
            arity(&args, 1, line, "rhs", name)?;
            Ok(RhsSpec::Preset(RhsPreset::Constant {
                value: parse_f64(args[0], line, "rhs")?,
            }))
        }
        "manufactured" => {
            arity(&args, 0, line, "rhs", name)?;
            Ok(RhsSpec::Preset(RhsPreset::ManufacturedQuadratic))
        }
        "quartic" => {
            arity(&args, 0, line, "rhs", name)?;
            Ok(RhsSpec::Preset(RhsPreset::ManufacturedQuartic))
        }
        "g_beta" => {
            arity(&args, 1, line, "rhs", name)?;
            Ok(RhsSpec::Preset(RhsPreset::GBeta { beta: parse_f64(args[0], line, "rhs")? }))
        }
        "file" => {
            arity(&args, 1, line, "rhs", name)?;
            Ok(RhsSpec::File(PathBuf::from(args[0])))
        }
        other => Err(err(Some(line), "rhs", format!("unknown rhs preset {other:?}"))),
    }
}

fn parse_pipelines(value: &str, line: usize) -> Result<Vec<Pipeline>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s {
            "solve" => Ok(Pipeline::Solve),
            "barriers" => Ok(Pipeline::Barriers),
            "differentiability" => Ok(Pipeline::Differentiability),
            "loglip" => Ok(Pipeline::LogLip),
            "lorentz-audit" => Ok(Pipeline::LorentzAudit),
            other => Err(err(Some(line), "pipeline", format!("unknown pipeline {other:?}"))),
        })
        .collect()
}

/// Parse and validate a configuration, filling defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    // Two passes: `n` and `seed` first, because the defaults of `q` and the
    // seeding of `random_cells` depend on them.
    let mut assignments: Vec<(usize, &str, &str)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(err(Some(line_no), "syntax", format!("expected key = value, got {line:?}")));
        };
        let key = line[..eq].trim();
        let value = line[eq + 1..].trim();
        if key.is_empty() || value.is_empty() {
            return Err(err(Some(line_no), "syntax", "empty key or value"));
        }
        assignments.push((line_no, key, value));
    }

    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for &(line_no, key, _) in &assignments {
        if let Some(prev) = seen.insert(key, line_no) {
            if key != "pipeline" {
                return Err(err(
                    Some(line_no),
                    key,
                    format!("duplicate key (first set on line {prev})"),
                ));
            }
        }
    }

    let mut dim = 2usize;
    let mut seed = 1u64;
    for &(line_no, key, value) in &assignments {
        match key {
            "n" => {
                dim = parse_usize(value, line_no, "n")?;
                if dim != 2 && dim != 3 {
                    return Err(err(Some(line_no), "n", format!("n must be 2 or 3, got {dim}")));
                }
            }
            "seed" => {
                seed = value.trim().parse::<u64>().map_err(|_| {
                    err(Some(line_no), "seed", format!("expected an integer seed, got {value:?}"))
                })?;
            }
            _ => {}
        }
    }

    let mut cfg = ExperimentConfig::with_defaults(dim);
    cfg.seed = seed;
    let mut q_set = false;
    let mut pipelines: Vec<Pipeline> = Vec::new();

    for (line_no, key, value) in assignments {
        match key {
            "n" | "seed" => {}
            "domain" => cfg.domain = parse_domain(value, line_no)?,
            "operator" => cfg.operator = parse_operator(value, line_no, seed)?,
            "rhs" => cfg.rhs = parse_rhs(value, line_no)?,
            "h" => {
                let h = parse_f64(value, line_no, "h")?;
                if !(h > 0.0) {
                    return Err(err(Some(line_no), "h", format!("h must be positive, got {h}")));
                }
                let nh = (1.0 / h).round();
                if nh < 2.0 || (nh * h - 1.0).abs() > 1e-9 {
                    return Err(err(
                        Some(line_no),
                        "h",
                        format!("1/h must be an integer of at least 2, got h = {h}"),
                    ));
                }
                cfg.h = h;
                cfg.nodes_half = nh as usize;
            }
            "q" => {
                cfg.q = parse_f64(value, line_no, "q")?;
                q_set = true;
            }
            "lambda_big" => {
                let l = parse_f64(value, line_no, "lambda_big")?;
                if !(l > 1.0) {
                    return Err(err(
                        Some(line_no),
                        "lambda_big",
                        format!("scale separation must exceed 1, got {l}"),
                    ));
                }
                cfg.lambda_big = l;
            }
            "levels" => {
                cfg.levels = parse_usize(value, line_no, "levels")?;
                if cfg.levels < 1 {
                    return Err(err(Some(line_no), "levels", "at least one level is required"));
                }
            }
            "rho" => {
                let r = parse_f64(value, line_no, "rho")?;
                if !(r > 0.0 && r < 1.0) {
                    return Err(err(
                        Some(line_no),
                        "rho",
                        format!("dyadic ratio must lie in (0, 1), got {r}"),
                    ));
                }
                cfg.rho = r;
            }
            "steps" => {
                cfg.steps = parse_usize(value, line_no, "steps")?;
                if cfg.steps < 1 {
                    return Err(err(Some(line_no), "steps", "at least one step is required"));
                }
            }
            "seeds" => {
                cfg.seeds = parse_usize(value, line_no, "seeds")?;
                if cfg.seeds < 1 {
                    return Err(err(Some(line_no), "seeds", "batch needs at least one seed"));
                }
            }
            "loc_cap" => cfg.loc_cap = parse_usize(value, line_no, "loc_cap")?,
            "cascade_levels" => {
                cfg.cascade_levels = parse_usize(value, line_no, "cascade_levels")?
            }
            "tol" => {
                let t = parse_f64(value, line_no, "tol")?;
                if !(t > 0.0) {
                    return Err(err(Some(line_no), "tol", format!("tolerance must be positive, got {t}")));
                }
                cfg.tol = t;
            }
            "pipeline" => pipelines.extend(parse_pipelines(value, line_no)?),
            "output" => cfg.output = PathBuf::from(value),
            other => return Err(err(Some(line_no), other, "unknown key")),
        }
    }

    if !q_set {
        cfg.q = cfg.dim as f64;
    }
    let n = cfg.dim as f64;
    if !(cfg.q > n - 1.0 && cfg.q <= n) {
        return Err(err(
            None,
            "q",
            format!("q must lie in (n - 1, n] = ({}, {}], got {}", n - 1.0, n, cfg.q),
        ));
    }

    pipelines.sort();
    pipelines.dedup();
    if pipelines.is_empty() {
        return Err(err(None, "pipeline", "at least one pipeline must be selected"));
    }
    if matches!(cfg.rhs, RhsSpec::File(_))
        && pipelines
            .iter()
            .any(|p| matches!(p, Pipeline::Differentiability | Pipeline::LogLip))
    {
        return Err(err(
            None,
            "rhs",
            "file-based rhs carries no scale norms; differentiability and loglip need a preset",
        ));
    }
    cfg.pipelines = pipelines;
    Ok(cfg)
}

pub fn presets_text() -> String {
    let mut s = String::new();
    s.push_str("domains:\n");
    s.push_str("  half_space              flat boundary through the origin\n");
    s.push_str("  cone(slope)             opening x_n > slope * |x'|\n");
    s.push_str("  graph(coef, exponent)   boundary x_n = coef * |x'|^exponent\n");
    s.push_str("  max_affine(slope, offset)  boundary max(0, slope * (|x'| - offset))\n");
    s.push_str("operators:\n");
    s.push_str("  identity                the Laplacian\n");
    s.push_str("  smooth(lambda)          rotated diag(1, lambda), smooth angle field\n");
    s.push_str("  checker(lambda, size)   isotropic jump between lambda and 1\n");
    s.push_str("  random_cells(lambda, size)  per-cell rotations seeded by `seed`\n");
    s.push_str("rhs:\n");
    s.push_str("  zero\n");
    s.push_str("  constant(c)\n");
    s.push_str("  manufactured            g = 2, exact solution x_n (1 - x_n)\n");
    s.push_str("  quartic                 g = 2 - 6 x_n + 12 x_n^2\n");
    s.push_str("  g_beta(beta)            |x|^-1 log^-beta(e/|x|), the borderline family\n");
    s.push_str("  file(path)              sampled grid in the solve.csv column layout\n");
    s.push_str("pipelines:\n");
    s.push_str("  solve, barriers, differentiability, loglip, lorentz-audit\n");
    s.push_str("defaults:\n");
    s.push_str("  n = 2, h = 1/64, q = n, lambda_big = 4, levels = 8, rho = 1/2,\n");
    s.push_str("  steps = 8, seed = 1, seeds = 8, loc_cap = 320, cascade_levels = 8,\n");
    s.push_str("  tol = 1e-10, domain = half_space, operator = identity,\n");
    s.push_str("  rhs = manufactured, output = borderlab-out\n");
    s
}
