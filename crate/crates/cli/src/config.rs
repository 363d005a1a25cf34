//! Sectioned key = value run configuration.
//!
//! The format is plain text: `[section]` headers, `key = value` lines,
//! `#` comments. Unknown sections or keys are rejected, and validation
//! collects every problem instead of stopping at the first.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub grid: GridConfig,
    pub potential: PotentialConfig,
    pub scatter: ScatterConfig,
    pub gp: GpConfig,
    pub manybody: ManyBodyConfig,
    pub renorm: RenormConfig,
    pub verify: VerifyConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub dim: usize,
    pub points: Vec<usize>,
    pub spacing: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialConfig {
    pub kind: PotentialKind,
    pub depth: f64,
    pub radius: f64,
    pub dr: f64,
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    SquareWell,
    Zero,
    File,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterConfig {
    pub r_max: f64,
    pub tol: f64,
    pub trial_family_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpConfig {
    /// None means "auto": 8 pi a from the scattering solve.
    pub coupling: Option<f64>,
    pub trap: TrapKind,
    pub trap_strength: f64,
    pub dtau: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub dt: f64,
    pub t_final: f64,
    pub sample_every: usize,
    pub init: GpInit,
    pub init_width: f64,
    pub init_mode: usize,
    pub init_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrapKind {
    Harmonic,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpInit {
    Gaussian,
    Constant,
    PlaneWave,
    File,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManyBodyConfig {
    pub particles: usize,
    pub interaction_width: Option<f64>,
    pub krylov_dim: usize,
    pub dimension_cap: usize,
    pub init: MbInit,
    pub gs_tol: f64,
    pub n_values: Vec<usize>,
    pub depth_sweep: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbInit {
    Correlated,
    Product,
    GroundState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenormConfig {
    pub cutoff: f64,
    pub cutoff_sweep: Vec<f64>,
    pub dump_operators: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub tol_identity: f64,
    pub tol_commutator: f64,
    pub tol_ccr: f64,
    pub draws: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            grid: GridConfig { dim: 1, points: vec![16], spacing: vec![0.5] },
            potential: PotentialConfig {
                kind: PotentialKind::SquareWell,
                depth: 2.0,
                radius: 1.0,
                dr: 1e-3,
                file: None,
            },
            scatter: ScatterConfig { r_max: 8.0, tol: 1e-6, trial_family_size: 12 },
            gp: GpConfig {
                coupling: None,
                trap: TrapKind::Harmonic,
                trap_strength: 1.0,
                dtau: 0.05,
                tol: 1e-7,
                max_iter: 20_000,
                dt: 1e-3,
                t_final: 1.0,
                sample_every: 10,
                init: GpInit::Gaussian,
                init_width: 1.0,
                init_mode: 1,
                init_file: None,
            },
            manybody: ManyBodyConfig {
                particles: 2,
                interaction_width: None,
                krylov_dim: 24,
                dimension_cap: 2_000_000,
                init: MbInit::Correlated,
                gs_tol: 1e-9,
                n_values: vec![2, 3],
                depth_sweep: vec![0.5, 1.0, 2.0],
            },
            renorm: RenormConfig {
                cutoff: 0.9,
                cutoff_sweep: vec![1.0, 0.5, 0.25],
                dump_operators: false,
            },
            verify: VerifyConfig {
                tol_identity: 1e-8,
                tol_commutator: 1e-10,
                tol_ccr: 1e-12,
                draws: 200,
            },
        }
    }
}

/// Parse and fully validate; returns every problem found, not just the
/// first.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig, Vec<String>> {
    let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    let mut errors = Vec::new();
    let mut current = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            current = line[1..line.len() - 1].trim().to_string();
            sections.entry(current.clone()).or_default();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {}: expected `key = value`, got `{raw}`", lineno + 1));
            continue;
        };
        if current.is_empty() {
            errors.push(format!("line {}: key outside any [section]", lineno + 1));
            continue;
        }
        let prev = sections
            .get_mut(&current)
            .unwrap()
            .insert(key.trim().to_string(), value.trim().trim_matches('"').to_string());
        if prev.is_some() {
            errors.push(format!("line {}: duplicate key `{}`", lineno + 1, key.trim()));
        }
    }

    let mut cfg = RunConfig::default();
    let known_sections =
        ["run", "grid", "potential", "scatter", "gp", "manybody", "renorm", "verify"];
    for name in sections.keys() {
        if !known_sections.contains(&name.as_str()) {
            errors.push(format!("unknown section [{name}]"));
        }
    }

    let mut take = |section: &str, key: &str| -> Option<String> {
        sections.get_mut(section).and_then(|m| m.remove(key))
    };

    macro_rules! parse_into {
        ($section:literal, $key:literal, $slot:expr, $ty:ty) => {
            if let Some(v) = take($section, $key) {
                match v.parse::<$ty>() {
                    Ok(x) => $slot = x,
                    Err(_) => errors.push(format!(
                        "[{}] {}: cannot parse `{v}` as {}",
                        $section,
                        $key,
                        stringify!($ty)
                    )),
                }
            }
        };
    }

    parse_into!("run", "seed", cfg.seed, u64);
    if let Some(v) = take("run", "out_dir") {
        cfg.out_dir = if base_dir == Path::new(".") {
            PathBuf::from(v)
        } else {
            base_dir.join(v)
        };
    }

    parse_into!("grid", "dim", cfg.grid.dim, usize);
    if let Some(v) = take("grid", "points") {
        match parse_list::<usize>(&v) {
            Ok(xs) => cfg.grid.points = xs,
            Err(e) => errors.push(format!("[grid] points: {e}")),
        }
    }
    if let Some(v) = take("grid", "spacing") {
        match parse_list::<f64>(&v) {
            Ok(xs) => cfg.grid.spacing = xs,
            Err(e) => errors.push(format!("[grid] spacing: {e}")),
        }
    }

    if let Some(v) = take("potential", "kind") {
        cfg.potential.kind = match v.as_str() {
            "square-well" => PotentialKind::SquareWell,
            "zero" => PotentialKind::Zero,
            "file" => PotentialKind::File,
            other => {
                errors.push(format!(
                    "[potential] kind: `{other}` is not one of square-well, zero, file"
                ));
                cfg.potential.kind
            }
        };
    }
    parse_into!("potential", "depth", cfg.potential.depth, f64);
    parse_into!("potential", "radius", cfg.potential.radius, f64);
    parse_into!("potential", "dr", cfg.potential.dr, f64);
    if let Some(v) = take("potential", "file") {
        cfg.potential.file = Some(base_dir.join(v));
    }

    parse_into!("scatter", "r_max", cfg.scatter.r_max, f64);
    parse_into!("scatter", "tol", cfg.scatter.tol, f64);
    parse_into!("scatter", "trial_family_size", cfg.scatter.trial_family_size, usize);

    if let Some(v) = take("gp", "coupling") {
        if v == "auto" {
            cfg.gp.coupling = None;
        } else {
            match v.parse::<f64>() {
                Ok(x) => cfg.gp.coupling = Some(x),
                Err(_) => errors.push(format!("[gp] coupling: cannot parse `{v}`")),
            }
        }
    }
    if let Some(v) = take("gp", "trap") {
        cfg.gp.trap = match v.as_str() {
            "harmonic" => TrapKind::Harmonic,
            "none" => TrapKind::None,
            other => {
                errors.push(format!("[gp] trap: `{other}` is not one of harmonic, none"));
                cfg.gp.trap
            }
        };
    }
    parse_into!("gp", "trap_strength", cfg.gp.trap_strength, f64);
    parse_into!("gp", "dtau", cfg.gp.dtau, f64);
    parse_into!("gp", "tol", cfg.gp.tol, f64);
    parse_into!("gp", "max_iter", cfg.gp.max_iter, usize);
    parse_into!("gp", "dt", cfg.gp.dt, f64);
    parse_into!("gp", "t_final", cfg.gp.t_final, f64);
    parse_into!("gp", "sample_every", cfg.gp.sample_every, usize);
    if let Some(v) = take("gp", "init") {
        cfg.gp.init = match v.as_str() {
            "gaussian" => GpInit::Gaussian,
            "constant" => GpInit::Constant,
            "plane-wave" => GpInit::PlaneWave,
            "file" => GpInit::File,
            other => {
                errors.push(format!(
                    "[gp] init: `{other}` is not one of gaussian, constant, plane-wave, file"
                ));
                cfg.gp.init
            }
        };
    }
    parse_into!("gp", "init_width", cfg.gp.init_width, f64);
    parse_into!("gp", "init_mode", cfg.gp.init_mode, usize);
    if let Some(v) = take("gp", "init_file") {
        cfg.gp.init_file = Some(base_dir.join(v));
    }

    parse_into!("manybody", "particles", cfg.manybody.particles, usize);
    if let Some(v) = take("manybody", "interaction_width") {
        if v == "auto" {
            cfg.manybody.interaction_width = None;
        } else {
            match v.parse::<f64>() {
                Ok(x) => cfg.manybody.interaction_width = Some(x),
                Err(_) => errors.push(format!("[manybody] interaction_width: cannot parse `{v}`")),
            }
        }
    }
    parse_into!("manybody", "krylov_dim", cfg.manybody.krylov_dim, usize);
    parse_into!("manybody", "dimension_cap", cfg.manybody.dimension_cap, usize);
    if let Some(v) = take("manybody", "init") {
        cfg.manybody.init = match v.as_str() {
            "correlated" => MbInit::Correlated,
            "product" => MbInit::Product,
            "ground-state" => MbInit::GroundState,
            other => {
                errors.push(format!(
                    "[manybody] init: `{other}` is not one of correlated, product, ground-state"
                ));
                cfg.manybody.init
            }
        };
    }
    parse_into!("manybody", "gs_tol", cfg.manybody.gs_tol, f64);
    if let Some(v) = take("manybody", "n_values") {
        match parse_list::<usize>(&v) {
            Ok(xs) => cfg.manybody.n_values = xs,
            Err(e) => errors.push(format!("[manybody] n_values: {e}")),
        }
    }
    if let Some(v) = take("manybody", "depth_sweep") {
        match parse_list::<f64>(&v) {
            Ok(xs) => cfg.manybody.depth_sweep = xs,
            Err(e) => errors.push(format!("[manybody] depth_sweep: {e}")),
        }
    }

    parse_into!("renorm", "cutoff", cfg.renorm.cutoff, f64);
    if let Some(v) = take("renorm", "cutoff_sweep") {
        match parse_list::<f64>(&v) {
            Ok(xs) => cfg.renorm.cutoff_sweep = xs,
            Err(e) => errors.push(format!("[renorm] cutoff_sweep: {e}")),
        }
    }
    parse_into!("renorm", "dump_operators", cfg.renorm.dump_operators, bool);

    parse_into!("verify", "tol_identity", cfg.verify.tol_identity, f64);
    parse_into!("verify", "tol_commutator", cfg.verify.tol_commutator, f64);
    parse_into!("verify", "tol_ccr", cfg.verify.tol_ccr, f64);
    parse_into!("verify", "draws", cfg.verify.draws, usize);

    // leftover keys are unknown
    for (section, keys) in &sections {
        if !known_sections.contains(&section.as_str()) {
            continue;
        }
        for key in keys.keys() {
            errors.push(format!("unknown key `{key}` in [{section}]"));
        }
    }

    validate(&mut cfg, &mut errors);
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(errors)
    }
}

fn validate(cfg: &mut RunConfig, errors: &mut Vec<String>) {
    if cfg.grid.dim == 0 || cfg.grid.dim > 3 {
        errors.push(format!("[grid] dim must be 1, 2 or 3, got {}", cfg.grid.dim));
    }
    if cfg.grid.points.len() == 1 && cfg.grid.dim > 1 {
        cfg.grid.points = vec![cfg.grid.points[0]; cfg.grid.dim];
    }
    if cfg.grid.spacing.len() == 1 && cfg.grid.dim > 1 {
        cfg.grid.spacing = vec![cfg.grid.spacing[0]; cfg.grid.dim];
    }
    if cfg.grid.points.len() != cfg.grid.dim {
        errors.push(format!(
            "[grid] points: expected {} entries, got {}",
            cfg.grid.dim,
            cfg.grid.points.len()
        ));
    }
    for &p in &cfg.grid.points {
        if p < 2 || !p.is_power_of_two() {
            errors.push(format!("[grid] points: {p} is not a power of two >= 2"));
        }
    }
    for &s in &cfg.grid.spacing {
        if !(s > 0.0) {
            errors.push("[grid] spacing must be positive".into());
        }
    }
    if cfg.potential.depth < 0.0 {
        errors.push("[potential] depth must be non-negative (V >= 0)".into());
    }
    if !(cfg.potential.radius > 0.0) {
        errors.push("[potential] radius must be positive".into());
    }
    if !(cfg.potential.dr > 0.0) {
        errors.push("[potential] dr must be positive".into());
    }
    if cfg.potential.kind == PotentialKind::File {
        match &cfg.potential.file {
            None => errors.push("[potential] kind = file requires a `file` key".into()),
            Some(p) => {
                if !p.exists() {
                    errors.push(format!("[potential] file `{}` does not exist", p.display()));
                }
            }
        }
    }
    if !(cfg.scatter.r_max > 0.0) {
        errors.push("[scatter] r_max must be positive".into());
    }
    if let Some(g) = cfg.gp.coupling {
        if g < 0.0 {
            errors.push(format!(
                "[gp] coupling must satisfy g >= 0 (focusing nonlinearities rejected), got {g}"
            ));
        }
    }
    if !(cfg.gp.dtau > 0.0) || !(cfg.gp.dt > 0.0) {
        errors.push("[gp] dtau and dt must be positive".into());
    }
    if cfg.gp.init == GpInit::File {
        match &cfg.gp.init_file {
            None => errors.push("[gp] init = file requires `init_file`".into()),
            Some(p) => {
                if !p.exists() {
                    errors.push(format!("[gp] init_file `{}` does not exist", p.display()));
                }
            }
        }
    }
    if cfg.manybody.particles == 0 {
        errors.push("[manybody] particles must be at least 1".into());
    }
    if cfg.manybody.krylov_dim < 2 {
        errors.push("[manybody] krylov_dim must be at least 2".into());
    }
    if !(cfg.renorm.cutoff > 0.0) {
        errors.push("[renorm] cutoff must be positive".into());
    }
    if cfg.renorm.cutoff_sweep.is_empty() {
        errors.push("[renorm] cutoff_sweep must not be empty".into());
    }
}

fn parse_list<T: std::str::FromStr>(v: &str) -> Result<Vec<T>, String> {
    v.split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| format!("cannot parse `{}`", s.trim())))
        .collect()
}

/// Serialize back to the text format; `parse(serialize(c)) == c`.
pub fn serialize_config(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "[run]");
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "out_dir = \"{}\"", cfg.out_dir.display());
    let _ = writeln!(s, "\n[grid]");
    let _ = writeln!(s, "dim = {}", cfg.grid.dim);
    let _ = writeln!(s, "points = {}", join(&cfg.grid.points));
    let _ = writeln!(s, "spacing = {}", join(&cfg.grid.spacing));
    let _ = writeln!(s, "\n[potential]");
    let kind = match cfg.potential.kind {
        PotentialKind::SquareWell => "square-well",
        PotentialKind::Zero => "zero",
        PotentialKind::File => "file",
    };
    let _ = writeln!(s, "kind = {kind}");
    let _ = writeln!(s, "depth = {}", cfg.potential.depth);
    let _ = writeln!(s, "radius = {}", cfg.potential.radius);
    let _ = writeln!(s, "dr = {}", cfg.potential.dr);
    if let Some(f) = &cfg.potential.file {
        let _ = writeln!(s, "file = \"{}\"", f.display());
    }
    let _ = writeln!(s, "\n[scatter]");
    let _ = writeln!(s, "r_max = {}", cfg.scatter.r_max);
    let _ = writeln!(s, "tol = {:e}", cfg.scatter.tol);
    let _ = writeln!(s, "trial_family_size = {}", cfg.scatter.trial_family_size);
    let _ = writeln!(s, "\n[gp]");
    match cfg.gp.coupling {
        Some(g) => {
            let _ = writeln!(s, "coupling = {g}");
        }
        None => {
            let _ = writeln!(s, "coupling = auto");
        }
    }
    let trap = match cfg.gp.trap {
        TrapKind::Harmonic => "harmonic",
        TrapKind::None => "none",
    };
    let _ = writeln!(s, "trap = {trap}");
    let _ = writeln!(s, "trap_strength = {}", cfg.gp.trap_strength);
    let _ = writeln!(s, "dtau = {}", cfg.gp.dtau);
    let _ = writeln!(s, "tol = {:e}", cfg.gp.tol);
    let _ = writeln!(s, "max_iter = {}", cfg.gp.max_iter);
    let _ = writeln!(s, "dt = {}", cfg.gp.dt);
    let _ = writeln!(s, "t_final = {}", cfg.gp.t_final);
    let _ = writeln!(s, "sample_every = {}", cfg.gp.sample_every);
    let init = match cfg.gp.init {
        GpInit::Gaussian => "gaussian",
        GpInit::Constant => "constant",
        GpInit::PlaneWave => "plane-wave",
        GpInit::File => "file",
    };
    let _ = writeln!(s, "init = {init}");
    let _ = writeln!(s, "init_width = {}", cfg.gp.init_width);
    let _ = writeln!(s, "init_mode = {}", cfg.gp.init_mode);
    if let Some(f) = &cfg.gp.init_file {
        let _ = writeln!(s, "init_file = \"{}\"", f.display());
    }
    let _ = writeln!(s, "\n[manybody]");
    let _ = writeln!(s, "particles = {}", cfg.manybody.particles);
    match cfg.manybody.interaction_width {
        Some(w) => {
            let _ = writeln!(s, "interaction_width = {w}");
        }
        None => {
            let _ = writeln!(s, "interaction_width = auto");
        }
    }
    let _ = writeln!(s, "krylov_dim = {}", cfg.manybody.krylov_dim);
    let _ = writeln!(s, "dimension_cap = {}", cfg.manybody.dimension_cap);
    let init = match cfg.manybody.init {
        MbInit::Correlated => "correlated",
        MbInit::Product => "product",
        MbInit::GroundState => "ground-state",
    };
    let _ = writeln!(s, "init = {init}");
    let _ = writeln!(s, "gs_tol = {:e}", cfg.manybody.gs_tol);
    let _ = writeln!(s, "n_values = {}", join(&cfg.manybody.n_values));
    let _ = writeln!(s, "depth_sweep = {}", join(&cfg.manybody.depth_sweep));
    let _ = writeln!(s, "\n[renorm]");
    let _ = writeln!(s, "cutoff = {}", cfg.renorm.cutoff);
    let _ = writeln!(s, "cutoff_sweep = {}", join(&cfg.renorm.cutoff_sweep));
    let _ = writeln!(s, "dump_operators = {}", cfg.renorm.dump_operators);
    let _ = writeln!(s, "\n[verify]");
    let _ = writeln!(s, "tol_identity = {:e}", cfg.verify.tol_identity);
    let _ = writeln!(s, "tol_commutator = {:e}", cfg.verify.tol_commutator);
    let _ = writeln!(s, "tol_ccr = {:e}", cfg.verify.tol_ccr);
    let _ = writeln!(s, "draws = {}", cfg.verify.draws);
    s
}

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scatter_config_gets_defaults() {
        let cfg = parse_config("[potential]\ndepth = 2.0\nradius = 1.0\n", Path::new(".")).unwrap();
        assert_eq!(cfg.potential.depth, 2.0);
        assert_eq!(cfg.potential.dr, 1e-3);
        assert_eq!(cfg.scatter.r_max, 8.0);
    }

    #[test]
    fn negative_coupling_is_rejected_naming_the_rule() {
        let err = parse_config("[gp]\ncoupling = -1.0\n", Path::new(".")).unwrap_err();
        assert!(err.iter().any(|e| e.contains("g >= 0")), "{err:?}");
    }

    #[test]
    fn unknown_keys_are_listed() {
        let err = parse_config(
            "[gp]\ncouplingg = 1.0\n[grid]\ndim = 2\nwidth = 3\n",
            Path::new("."),
        )
        .unwrap_err();
        assert!(err.iter().any(|e| e.contains("couplingg")), "{err:?}");
        assert!(err.iter().any(|e| e.contains("width")), "{err:?}");
    }

    #[test]
    fn all_errors_are_collected() {
        let err = parse_config(
            "[grid]\ndim = 5\npoints = 7\n[potential]\ndepth = -2\n",
            Path::new("."),
        )
        .unwrap_err();
        assert!(err.len() >= 3, "{err:?}");
    }

    #[test]
    fn roundtrip_is_identity() {
        let text = "[run]\nseed = 7\n[grid]\ndim = 2\npoints = 8,16\nspacing = 0.5,0.25\n\
                    [gp]\ncoupling = 1.5\ntrap = none\n[manybody]\nparticles = 3\n";
        let cfg = parse_config(text, Path::new(".")).unwrap();
        let cfg2 = parse_config(&serialize_config(&cfg), Path::new(".")).unwrap();
        assert_eq!(cfg, cfg2);
    }
}
