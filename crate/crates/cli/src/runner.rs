//! Subcommand pipelines: wire configs into the core modules, write the
//! artifacts, and assemble the check rows for the run report.

use crate::config::{GpInit, MbInit, PotentialKind, RunConfig, TrapKind};
use crate::report::{CheckRow, ReportBuilder, RunReport};
use anyhow::{bail, Context, Result};
use gplab_core::fft::SpectralEngine;
use gplab_core::field::Field;
use gplab_core::fock::{self, FockVector, TruncatedBasis};
use gplab_core::gp::{self, GpParams};
use gplab_core::grid::Grid;
use gplab_core::io as gpio;
use gplab_core::manybody::{self, ManyBodyConfig};
use gplab_core::radial::RadialPotential;
use gplab_core::renorm::{self, RenormSetup, SectorChain};
use gplab_core::scalar::C;
use gplab_core::scattering::{self, ScatteringSolution};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub fn build_grid(cfg: &RunConfig) -> Result<Grid<f64>> {
    Grid::new(&cfg.grid.points, &cfg.grid.spacing).context("grid")
}

pub fn build_potential(cfg: &RunConfig) -> Result<RadialPotential<f64>> {
    match cfg.potential.kind {
        PotentialKind::SquareWell => RadialPotential::square_well(
            cfg.potential.depth,
            cfg.potential.radius,
            cfg.potential.dr,
        )
        .context("potential"),
        PotentialKind::Zero => {
            RadialPotential::new(vec![0.0, 0.0], cfg.potential.dr).context("potential")
        }
        PotentialKind::File => {
            let path = cfg.potential.file.as_ref().expect("validated");
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let mut rs = Vec::new();
            let mut vs = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let mut parts = line.split_whitespace();
                let (Some(r), Some(v)) = (parts.next(), parts.next()) else {
                    bail!("{}:{}: expected `r V` columns", path.display(), lineno + 1);
                };
                rs.push(r.parse::<f64>().context("r column")?);
                vs.push(v.parse::<f64>().context("V column")?);
            }
            RadialPotential::from_table(&rs, &vs).context("tabulated potential")
        }
    }
}

fn solve_scattering(cfg: &RunConfig, v: &RadialPotential<f64>) -> Result<ScatteringSolution<f64>> {
    scattering::solve_zero_energy(v, cfg.scatter.r_max, cfg.scatter.tol).context("scattering solve")
}

fn coupling_of(cfg: &RunConfig, sol: &ScatteringSolution<f64>) -> f64 {
    cfg.gp
        .coupling
        .unwrap_or_else(|| 8.0 * std::f64::consts::PI * sol.scattering_length())
}

fn trap_of(cfg: &RunConfig, grid: &Grid<f64>) -> Option<Vec<f64>> {
    match cfg.gp.trap {
        TrapKind::Harmonic => Some(GpParams::harmonic_trap(grid, cfg.gp.trap_strength)),
        TrapKind::None => None,
    }
}

fn initial_field(cfg: &RunConfig, grid: &Grid<f64>) -> Result<Field<f64>> {
    Ok(match cfg.gp.init {
        GpInit::Gaussian => {
            let c = grid.center();
            Field::gaussian(grid.clone(), &c, cfg.gp.init_width).context("gaussian init")?
        }
        GpInit::Constant => Field::constant_normalized(grid.clone()),
        GpInit::PlaneWave => {
            let mut modes = vec![0usize; grid.dim()];
            modes[0] = cfg.gp.init_mode;
            Field::plane_wave(grid.clone(), &modes)
        }
        GpInit::File => {
            let path = cfg.gp.init_file.as_ref().expect("validated");
            let mut reader =
                fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
            gpio::read_field(&mut reader).context("reading field file")?
        }
    })
}

fn write_csv(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{header}");
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn run_scatter(cfg: &RunConfig, report: &mut ReportBuilder) -> Result<()> {
    let v = build_potential(cfg)?;
    let sol = solve_scattering(cfg, &v)?;
    let a_ode = sol.scattering_length();
    let a_var = scattering::scattering_length_variational(&v, cfg.scatter.trial_family_size)?;
    let a_int = scattering::scattering_length_integral_identity(&v, &sol);
    let residual = scattering::asymptote_residual(&sol)?;

    fs::create_dir_all(&cfg.out_dir)?;
    let json_path = cfg.out_dir.join("scatter.json");
    let payload = serde_json::json!({
        "a_ode": a_ode,
        "a_variational": a_var,
        "a_integral_identity": a_int,
        "asymptote_residual": residual,
    });
    fs::write(&json_path, serde_json::to_string_pretty(&payload)?)?;
    report.artifact(&json_path);

    report.check(CheckRow::upper("asymptote-residual", "eq:flrgx", residual, cfg.scatter.tol));
    let rel = (a_int - a_ode).abs() / a_ode.abs().max(1e-300);
    report.check(CheckRow::upper("integral-identity", "app:C int V f = 8 pi a", rel, 1e-6));
    // the variational route minimizes over a subfamily and upper-bounds a
    report.check(CheckRow::lower(
        "variational-upper-bound",
        "def:a",
        a_var - a_ode,
        -1e-9,
    ));
    for issue in sol.validate(cfg.scatter.tol) {
        report.warn(issue);
    }
    Ok(())
}

pub fn run_groundstate(cfg: &RunConfig, report: &mut ReportBuilder) -> Result<()> {
    let grid = build_grid(cfg)?;
    let v = build_potential(cfg)?;
    let g = if v.is_zero() && cfg.gp.coupling.is_none() {
        0.0
    } else if cfg.gp.coupling.is_some() {
        cfg.gp.coupling.unwrap()
    } else {
        coupling_of(cfg, &solve_scattering(cfg, &v)?)
    };
    let params = GpParams::new(g, trap_of(cfg, &grid))?;
    let init = initial_field(cfg, &grid)?;
    let gs = gp::minimize_imaginary_time(&params, init, cfg.gp.dtau, cfg.gp.tol, cfg.gp.max_iter)?;

    fs::create_dir_all(&cfg.out_dir)?;
    let field_path = cfg.out_dir.join("groundstate.gpf");
    let mut fh = fs::File::create(&field_path)?;
    gpio::write_field(&mut fh, &gs.field)?;
    report.artifact(&field_path);

    let json_path = cfg.out_dir.join("groundstate.json");
    let payload = serde_json::json!({
        "coupling": g,
        "energy": {
            "kinetic": gs.energy.kinetic,
            "trap": gs.energy.trap,
            "interaction": gs.energy.interaction,
            "total": gs.energy.total,
        },
        "mu": gs.mu,
        "residual": gs.residual,
        "iterations": gs.iterations,
        "boundary_density": gs.boundary_density,
    });
    fs::write(&json_path, serde_json::to_string_pretty(&payload)?)?;
    report.artifact(&json_path);

    report.check(CheckRow::upper(
        "euler-lagrange-residual",
        "thm:1.1 Euler-Lagrange",
        gs.residual,
        cfg.gp.tol,
    ));
    let mu_identity = (gs.mu - gs.energy.total - gs.energy.interaction).abs();
    report.check(CheckRow::upper(
        "chemical-potential-identity",
        "thm:1.1 mu = e + 4 pi a ||phi||_4^4",
        mu_identity,
        1e-8,
    ));
    let mut worst_rise: f64 = 0.0;
    for w in gs.energy_history.windows(2) {
        worst_rise = worst_rise.max(w[1] - w[0]);
    }
    report.check(CheckRow::upper(
        "energy-monotone",
        "imaginary-time descent",
        worst_rise,
        1e-12,
    ));
    if gs.boundary_density > 1e-6 {
        report.warn(format!(
            "boundary density {:.3e} above 1e-6: trap may not confine the minimizer away from the torus seam",
            gs.boundary_density
        ));
    }
    Ok(())
}

pub fn run_evolve_gp(cfg: &RunConfig, report: &mut ReportBuilder) -> Result<()> {
    let grid = build_grid(cfg)?;
    let v = build_potential(cfg)?;
    let g = if cfg.gp.coupling.is_some() {
        cfg.gp.coupling.unwrap()
    } else if v.is_zero() {
        0.0
    } else {
        coupling_of(cfg, &solve_scattering(cfg, &v)?)
    };
    let params = GpParams::new(g, None)?;
    let psi0 = initial_field(cfg, &grid)?;
    let n_steps = (cfg.gp.t_final / cfg.gp.dt).round() as usize;
    let traj = gp::evolve_split_step(&psi0, &params, cfg.gp.dt, n_steps, cfg.gp.sample_every)?;

    let mut eng = SpectralEngine::for_grid(&grid);
    let e0 = gp::gp_energy(&psi0, &params, &mut eng)?;
    let mut rows = Vec::new();
    let mut worst_mass: f64 = 0.0;
    let mut worst_energy: f64 = 0.0;
    for (t, f) in traj.times.iter().zip(&traj.fields) {
        let mass = f.norm_l2();
        let e = gp::gp_energy(f, &params, &mut eng)?;
        let h1 = f.sobolev_norm(&mut eng, 1)?;
        let h2 = f.sobolev_norm(&mut eng, 2)?;
        let h4 = f.sobolev_norm(&mut eng, 4)?;
        worst_mass = worst_mass.max((mass - 1.0).abs());
        worst_energy = worst_energy.max((e.total - e0.total).abs() / e0.total.abs().max(1e-300));
        rows.push(vec![*t, mass, e.kinetic, e.interaction, e.total, h1, h2, h4]);
    }
    fs::create_dir_all(&cfg.out_dir)?;
    let csv_path = cfg.out_dir.join("evolve_gp.csv");
    write_csv(&csv_path, "t,mass,e_kin,e_int,e_total,h1,h2,h4", &rows)?;
    report.artifact(&csv_path);
    let field_path = cfg.out_dir.join("final_state.gpf");
    let mut fh = fs::File::create(&field_path)?;
    gpio::write_field(&mut fh, traj.fields.last().unwrap())?;
    report.artifact(&field_path);

    let per_time = cfg.gp.t_final.max(1.0);
    report.check(CheckRow::upper(
        "mass-conservation",
        "prop:GPdyn(a) mass",
        worst_mass / per_time,
        1e-10,
    ));
    report.check(CheckRow::upper(
        "energy-conservation",
        "prop:GPdyn(a) energy",
        worst_energy / per_time,
        1e-8,
    ));
    if cfg.gp.init == GpInit::PlaneWave && g == 0.0 {
        let mut modes = vec![0usize; grid.dim()];
        modes[0] = cfg.gp.init_mode;
        let k2: f64 = (0..grid.dim())
            .map(|a| grid.wavenumber(a, modes[a]).powi(2))
            .sum();
        let mut worst: f64 = 0.0;
        for (t, f) in traj.times.iter().zip(&traj.fields) {
            let phase = C::from_polar(1.0, -k2 * t);
            for (got, init) in f.values().iter().zip(psi0.values()) {
                worst = worst.max((got - init * phase).norm());
            }
        }
        report.check(CheckRow::upper(
            "plane-wave-phase",
            "eq:GPdyn kinetic eigenfunction",
            worst,
            1e-12,
        ));
    }
    Ok(())
}

pub fn run_evolve_manybody(cfg: &RunConfig, report: &mut ReportBuilder) -> Result<()> {
    let grid = build_grid(cfg)?;
    let v = build_potential(cfg)?;
    let sol = solve_scattering(cfg, &v)?;
    let g = coupling_of(cfg, &sol);

    // condensate reference: trapped minimizer, then release
    let trap = trap_of(cfg, &grid);
    let params_trapped = GpParams::new(g, trap.clone())?;
    let init = initial_field(cfg, &grid)?;
    let phi0 = if trap.is_some() {
        gp::minimize_imaginary_time(&params_trapped, init, cfg.gp.dtau, cfg.gp.tol, cfg.gp.max_iter)?
            .field
    } else {
        init
    };

    let mut mb_cfg = ManyBodyConfig::new(grid.clone(), cfg.manybody.particles, v.clone());
    mb_cfg.interaction_width = cfg.manybody.interaction_width;
    mb_cfg.dimension_cap = cfg.manybody.dimension_cap;
    let basis = mb_cfg.basis()?;
    let h_free = manybody::build_h(&mb_cfg, &basis)?;

    let psi0 = match cfg.manybody.init {
        MbInit::Correlated => manybody::correlated_product_state(
            basis.clone(),
            &phi0,
            &sol,
            mb_cfg.width(),
        )?,
        MbInit::Product => FockVector::product_state(basis.clone(), &phi0),
        MbInit::GroundState => {
            let mut trapped_cfg = mb_cfg.clone();
            trapped_cfg.trap = trap.clone();
            let h_trapped = manybody::build_h(&trapped_cfg, &basis)?;
            manybody::ground_state(&h_trapped, basis.clone(), cfg.manybody.gs_tol, 600)?.1
        }
    };

    let n_steps = (cfg.gp.t_final / cfg.gp.dt).round() as usize;
    let gp_traj = gp::evolve_split_step(&phi0, &GpParams::new(g, None)?, cfg.gp.dt, n_steps, cfg.gp.sample_every)?;
    // the many-body stepper advances one Krylov step per sample interval
    let mb_dt = cfg.gp.dt * cfg.gp.sample_every as f64;
    let mb_steps = gp_traj.times.len() - 1;
    let mb_traj = manybody::evolve(&h_free, &psi0, mb_dt, mb_steps, 1, cfg.manybody.krylov_dim)?;

    let monitor = manybody::gronwall_monitor(&mb_traj, &gp_traj, &h_free, &sol, cfg.renorm.cutoff, None)?;

    let e0 = psi0.expectation(&h_free).re;
    let n = cfg.manybody.particles as f64;
    let mut rows = Vec::new();
    let mut worst_energy: f64 = 0.0;
    let mut worst_identity: f64 = 0.0;
    for (record, (psi, phi)) in monitor
        .records
        .iter()
        .zip(mb_traj.states.iter().zip(&gp_traj.fields))
    {
        let dep = manybody::depletion(psi, phi)?;
        worst_identity = worst_identity.max((dep.via_density - dep.via_number).abs());
        worst_energy =
            worst_energy.max((record.energy - e0).abs() / e0.abs().max(1.0));
        let fidelity = psi
            .inner(&FockVector::product_state(psi.basis().clone(), phi))
            .expect("same basis")
            .norm();
        rows.push(vec![
            record.t,
            record.depletion,
            record.n_perp_expect,
            record.gronwall_value,
            record.energy,
            fidelity,
        ]);
    }
    fs::create_dir_all(&cfg.out_dir)?;
    let csv_path = cfg.out_dir.join("evolve_manybody.csv");
    write_csv(
        &csv_path,
        "t,depletion,n_perp,gronwall,energy,fidelity_to_condensate",
        &rows,
    )?;
    report.artifact(&csv_path);
    let state_path = cfg.out_dir.join("final_state.mbf");
    let mut fh = fs::File::create(&state_path)?;
    gpio::write_state(&mut fh, mb_traj.states.last().unwrap())?;
    report.artifact(&state_path);

    let per_time = cfg.gp.t_final.max(1.0);
    report.check(CheckRow::upper(
        "unitarity",
        "Schroedinger evolution",
        mb_traj.max_norm_drift / per_time,
        1e-10,
    ));
    report.check(CheckRow::upper(
        "energy-conservation",
        "Schroedinger evolution",
        worst_energy / per_time,
        1e-8,
    ));
    report.check(CheckRow::upper(
        "depletion-identity",
        "eq:linkNbot",
        worst_identity,
        1e-10,
    ));
    let domination_slack = monitor
        .records
        .iter()
        .map(|r| r.gronwall_value - n * r.depletion)
        .fold(f64::INFINITY, f64::min);
    report.check(CheckRow::lower(
        "gronwall-dominates-excitations",
        "prop:aux first bound",
        domination_slack,
        -1e-8,
    ));
    Ok(())
}

pub fn run_verify_ops(cfg: &RunConfig, report: &mut ReportBuilder) -> Result<()> {
    let grid = build_grid(cfg)?;
    let v = build_potential(cfg)?;
    let sol = solve_scattering(cfg, &v)?;
    let g = coupling_of(cfg, &sol);
    let n = cfg.manybody.particles;

    // CCR on the truncated space
    let tb = TruncatedBasis::new(grid.len(), n, cfg.manybody.dimension_cap)?;
    let mut f = Field::from_fn(grid.clone(), |x| C::new(0.4 + x[0], -0.3 * x[0]));
    f.normalize()?;
    let mut gfield = Field::from_fn(grid.clone(), |x| C::new(1.1 - x[0], 0.2));
    gfield.normalize()?;
    let ccr = fock::ccr_defect(&f, &gfield, &tb)?;
    report.check(CheckRow::upper(
        "ccr-restricted",
        "sec:2 [a(f),a*(g)] = <f,g>",
        ccr.restricted_defect,
        cfg.verify.tol_ccr,
    ));
    report.check(CheckRow::lower(
        "ccr-top-sector-artifact",
        "truncation diagnostic",
        ccr.top_sector_defect,
        1e-6,
    ));

    // condensate reference and operator set
    let l = grid.extent(0);
    let mut phi = Field::from_fn(grid.clone(), |x| {
        C::new(1.0 + 0.2 * (2.0 * std::f64::consts::PI * x[0] / l).cos(), 0.0)
    });
    phi.normalize()?;
    let chain = SectorChain::new(grid.len(), n, cfg.manybody.dimension_cap)?;
    let setup = RenormSetup::new(chain, phi.clone())?;
    let dphi = gp::eom_derivative(&phi, g);

    // excitation-number two-route identity
    let nperp = setup.excitation_number()?;
    let q = fock::projector_q(&phi)?;
    let h_d = grid.cell_volume();
    let lower = setup.chain.lower1.clone();
    let mut route_b = fock::SparseOperator::zero(nperp.domain(), nperp.codomain());
    for x in 0..grid.len() {
        let aq = fock::annihilate_q_site(&setup.chain.top, &lower, &q, h_d, x)?;
        route_b = route_b
            .add_scaled(&aq.adjoint().matmul(&aq).unwrap(), C::new(h_d, 0.0))
            .unwrap();
    }
    let two_route = nperp.sub(&route_b).unwrap().max_abs();
    report.check(CheckRow::upper(
        "excitation-number-two-route",
        "lm:fock N - a*(phi)a(phi) = int a*(Q)a(Q)",
        two_route,
        1e-10,
    ));

    // operator bound draws
    let bounds = fock::bounds::lemma_bound_suite(&grid, n, n, cfg.verify.draws, cfg.seed);
    report.check(CheckRow::upper(
        "operator-bound-draws",
        "lm:fock",
        bounds.violations.len() as f64,
        0.0,
    ));

    // decomposition identity and commutators
    let mb_cfg = ManyBodyConfig::new(grid.clone(), n, v.clone());
    let h_bare = manybody::build_h(&mb_cfg, &setup.chain.top)?;
    let mut eng = SpectralEngine::for_grid(&grid);
    let kin = phi.kinetic_energy(&mut eng);
    let quart: f64 =
        phi.values().iter().map(|z| z.norm_sqr().powi(2)).sum::<f64>() * grid.cell_volume();
    let e_gp = kin + 0.5 * g * quart;
    let vmat = mb_cfg.pair_matrix();
    let ch = setup.build_ch(&h_bare, &dphi, e_gp)?;
    let parts = setup.build_ch_parts(&dphi, e_gp, g, &vmat)?;
    let mut sum = parts[0].clone();
    for p in &parts[1..] {
        sum = sum.add(p).unwrap();
    }
    let decomposition = ch.sub(&sum).unwrap().max_abs();
    report.check(CheckRow::upper(
        "hamiltonian-decomposition",
        "eq:HNdec",
        decomposition,
        cfg.verify.tol_identity,
    ));

    let kernel = renorm::build_kernel(&phi, &sol, n, cfg.renorm.cutoff)?;
    let commutators = renorm::commutator_identities(&setup, &kernel)?;
    report.check(CheckRow::upper(
        "b-field-commutator",
        "lm:dec [b_x, N_ren]",
        commutators.b_field_defect,
        cfg.verify.tol_commutator,
    ));
    report.check(CheckRow::upper(
        "ladder-commutator",
        "lm:aux [N_perp, a*(Q_x)a(phi)]",
        commutators.ladder_defect,
        cfg.verify.tol_commutator,
    ));

    // Hermiticity and positivity of the renormalized operators
    let (dkernel, _) = renorm::kernel_time_derivatives(&phi, &dphi, None, &sol, n, cfg.renorm.cutoff)?;
    let n_ren = setup.build_n_ren(&kernel)?;
    let q_ren = setup.build_q_ren(&dkernel)?;
    let k_ren = setup.build_k_ren(&kernel)?;
    let v_ren = setup.build_v_ren(&kernel, &vmat)?;
    let herm = n_ren
        .hermiticity_defect()
        .unwrap()
        .max(q_ren.hermiticity_defect().unwrap())
        .max(ch.hermiticity_defect().unwrap())
        .max(k_ren.hermiticity_defect().unwrap())
        .max(v_ren.hermiticity_defect().unwrap());
    report.check(CheckRow::upper(
        "renormalized-hermiticity",
        "def:Nren / def:ren1 / def:cHN",
        herm,
        1e-10,
    ));
    let floor = renorm::smallest_eigenvalue_auto(&k_ren)
        .min(renorm::smallest_eigenvalue_auto(&v_ren));
    report.check(CheckRow::lower(
        "kinetic-potential-positivity",
        "sec:3 K_ren >= 0, V_ren >= 0",
        floor,
        -1e-8,
    ));

    // sandwich sweep with measured constants
    let mut sweep_rows = Vec::new();
    for &r in &cfg.renorm.cutoff_sweep {
        let k = renorm::build_kernel(&phi, &sol, n, r)?;
        let (dk, _) = renorm::kernel_time_derivatives(&phi, &dphi, None, &sol, n, r)?;
        let meas = renorm::measure_sandwich_free(&setup, &k, &dk)?;
        report.check(CheckRow::lower(
            &format!("sandwich-certificate-r-{r}"),
            "eq:NNren",
            meas.q_psd_slack,
            -1e-8,
        ));
        sweep_rows.push(vec![
            r,
            meas.kernel_hs,
            meas.c_plus,
            meas.c_minus.unwrap_or(f64::NAN),
            meas.q_constant,
        ]);
    }
    fs::create_dir_all(&cfg.out_dir)?;
    let sweep_path = cfg.out_dir.join("sandwich_sweep.csv");
    write_csv(&sweep_path, "r,kernel_hs,c_plus,c_minus,q_constant", &sweep_rows)?;
    report.artifact(&sweep_path);

    // domination constant
    let dom = renorm::measure_domination_constant(&ch, &q_ren, &n_ren, &nperp)?;
    report.check(CheckRow::lower(
        "domination-psd",
        "prop:aux first bound",
        dom.smallest_eigenvalue,
        -1e-8,
    ));

    // kernel diagnostics
    let diag = renorm::kernel_diagnostics(&kernel, &phi, &sol, &v);
    let diag_path = cfg.out_dir.join("kernel_diagnostics.json");
    fs::write(
        &diag_path,
        serde_json::to_string_pretty(&serde_json::json!({
            "hs_norm": diag.hs_norm,
            "column_bound_constant": diag.column_bound_constant,
            "regularized_laplacian_hs": diag.regularized_laplacian_hs,
            "gradient_contraction_hs": diag.gradient_contraction_hs,
            "measured_domination_constant": dom.c,
            "spectra": {
                "k_ren_floor": renorm::smallest_eigenvalue_auto(&k_ren),
                "v_ren_floor": renorm::smallest_eigenvalue_auto(&v_ren),
            },
        }))?,
    )?;
    report.artifact(&diag_path);

    if cfg.renorm.dump_operators {
        for (name, op) in [("n_ren", &n_ren), ("q_ren", &q_ren), ("ch", &ch)] {
            let path = cfg.out_dir.join(format!("{name}.coo"));
            let mut fh = fs::File::create(&path)?;
            gpio::write_operator_coo(&mut fh, op)?;
            report.artifact(&path);
        }
    }
    Ok(())
}

pub fn run_experiment_trapped_depletion(cfg: &RunConfig, report: &mut ReportBuilder) -> Result<()> {
    let grid = build_grid(cfg)?;
    let v = build_potential(cfg)?;
    let sol = solve_scattering(cfg, &v)?;
    let a = sol.scattering_length();

    let mut mb_cfg = ManyBodyConfig::new(grid.clone(), cfg.manybody.particles, v.clone());
    mb_cfg.trap = trap_of(cfg, &grid);
    mb_cfg.interaction_width = cfg.manybody.interaction_width;
    mb_cfg.dimension_cap = cfg.manybody.dimension_cap;
    let rows = manybody::trapped_depletion_experiment(
        &mb_cfg,
        a,
        &cfg.manybody.n_values,
        cfg.manybody.gs_tol,
    )?;
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            vec![
                r.particles as f64,
                r.depletion,
                r.n_times_depletion,
                r.mb_energy,
                r.gp_energy,
            ]
        })
        .collect();
    fs::create_dir_all(&cfg.out_dir)?;
    let csv_path = cfg.out_dir.join("trapped_depletion.csv");
    write_csv(&csv_path, "n,depletion,n_depletion,mb_energy,gp_energy", &table)?;
    report.artifact(&csv_path);

    let max = rows.iter().map(|r| r.n_times_depletion).fold(0.0f64, f64::max);
    let min = rows
        .iter()
        .map(|r| r.n_times_depletion)
        .fold(f64::INFINITY, f64::min);
    report.check(CheckRow::upper(
        "n-depletion-constancy",
        "prop:BEClwr trend",
        max / min.max(1e-300),
        2.0,
    ));

    // depletion monotone in the potential strength
    let mut sweep = Vec::new();
    for &depth in &cfg.manybody.depth_sweep {
        let vd = RadialPotential::square_well(depth, cfg.potential.radius, cfg.potential.dr)?;
        let ad = scattering::solve_zero_energy(&vd, cfg.scatter.r_max, cfg.scatter.tol)?
            .scattering_length();
        let mut c = mb_cfg.clone();
        c.potential = vd;
        let r = manybody::trapped_depletion_experiment(
            &c,
            ad,
            &cfg.manybody.n_values[..1],
            cfg.manybody.gs_tol,
        )?;
        sweep.push(vec![depth, r[0].depletion]);
    }
    let sweep_path = cfg.out_dir.join("depletion_vs_depth.csv");
    write_csv(&sweep_path, "depth,depletion", &sweep)?;
    report.artifact(&sweep_path);
    let monotone = sweep.windows(2).all(|w| w[0][1] < w[1][1]);
    report.check(CheckRow::lower(
        "depletion-monotone-in-potential",
        "prop:BEClwr trend",
        if monotone { 1.0 } else { 0.0 },
        1.0,
    ));
    Ok(())
}

/// Dispatch a validated config; returns the finished report.
pub fn run(command: &str, cfg: &RunConfig, config_echo: String) -> Result<RunReport> {
    let mut report = ReportBuilder::new(command, cfg.seed, config_echo);
    match command {
        "scatter" => run_scatter(cfg, &mut report)?,
        "groundstate" => run_groundstate(cfg, &mut report)?,
        "evolve-gp" => run_evolve_gp(cfg, &mut report)?,
        "evolve-manybody" => run_evolve_manybody(cfg, &mut report)?,
        "verify-ops" => run_verify_ops(cfg, &mut report)?,
        "experiment-trapped-depletion" => run_experiment_trapped_depletion(cfg, &mut report)?,
        other => bail!("unknown command {other}"),
    }
    let report = report.finish();
    crate::report::write_report(&report, &cfg.out_dir)?;
    Ok(report)
}

