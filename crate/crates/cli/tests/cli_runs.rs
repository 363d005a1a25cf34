//! End-to-end runs of the `gplab` binary: artifact schemas, determinism,
//! and config rejection paths.

use std::fs;
use std::path::Path;
use std::process::Command;

fn gplab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gplab"))
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn scatter_with_flags_reproduces_the_square_well_length() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = gplab()
        .args(["scatter", "--depth", "2.0", "--radius", "1.0", "--dr", "1e-3", "--r-max", "8.0"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let scatter = read_json(&out.join("scatter.json"));
    let exact = 1.0 - 1.0f64.tanh();
    let a_ode = scatter["a_ode"].as_f64().unwrap();
    assert!((a_ode - exact).abs() / exact < 1e-6, "a_ode = {a_ode}");
    assert!(scatter["a_variational"].as_f64().unwrap() >= a_ode - 1e-9);
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["schema"], "gplab-report-1");
    assert_eq!(report["pass"], true);
    // every check row names its anchor
    for check in report["checks"].as_array().unwrap() {
        assert!(!check["anchor"].as_str().unwrap().is_empty());
    }
}

#[test]
fn scatter_accepts_a_tabulated_potential() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("well.txt");
    let mut text = String::new();
    for i in 0..=1000 {
        let r = i as f64 * 1e-3;
        text.push_str(&format!("{r} 2.0\n"));
    }
    fs::write(&table, text).unwrap();
    let out = dir.path().join("out");
    let status = gplab()
        .arg("scatter")
        .arg("--potential-file")
        .arg(&table)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let scatter = read_json(&out.join("scatter.json"));
    let exact = 1.0 - 1.0f64.tanh();
    assert!((scatter["a_ode"].as_f64().unwrap() - exact).abs() < 1e-4);
}

#[test]
fn invalid_config_lists_every_problem_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    fs::write(&cfg, "[gp]\ncoupling = -2\nbogus = 1\n[nosuch]\nx = 1\n").unwrap();
    let output = gplab().arg("groundstate").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("g >= 0"), "{stderr}");
    assert!(stderr.contains("bogus"), "{stderr}");
    assert!(stderr.contains("nosuch"), "{stderr}");
}

#[test]
fn evolve_gp_plane_wave_preset_confirms_the_phase_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(
        &cfg,
        "[grid]\ndim = 1\npoints = 16\nspacing = 0.5\n\
         [potential]\nkind = zero\n\
         [gp]\ncoupling = 0\ninit = plane-wave\ninit_mode = 2\ndt = 1e-3\nt_final = 0.1\nsample_every = 20\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = gplab()
        .arg("evolve-gp")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let report = read_json(&out.join("report.json"));
    let checks = report["checks"].as_array().unwrap();
    let phase = checks
        .iter()
        .find(|c| c["name"] == "plane-wave-phase")
        .expect("phase check present");
    assert_eq!(phase["pass"], true);
    // csv has the documented columns
    let csv = fs::read_to_string(out.join("evolve_gp.csv")).unwrap();
    assert!(csv.starts_with("t,mass,e_kin,e_int,e_total,h1,h2,h4"));
}

#[test]
fn verify_ops_small_sector_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("verify.conf");
    fs::write(
        &cfg,
        "[grid]\ndim = 1\npoints = 4\nspacing = 0.5\n\
         [potential]\ndepth = 2.0\nradius = 1.0\ndr = 0.005\n\
         [manybody]\nparticles = 2\n\
         [renorm]\ncutoff = 0.45\ncutoff_sweep = 0.45,0.3\n\
         [verify]\ndraws = 40\n",
    )
    .unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let status = gplab()
            .arg("verify-ops")
            .arg("--config")
            .arg(&cfg)
            .arg("--seed")
            .arg("7")
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    let report = read_json(&out_a.join("report.json"));
    assert_eq!(report["pass"], true, "{report}");
    // identical config + seed => byte-identical numeric artifacts
    for name in ["sandwich_sweep.csv", "kernel_diagnostics.json"] {
        let a = fs::read(out_a.join(name)).unwrap();
        let b = fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn groundstate_writes_field_and_energy_checks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gs.conf");
    fs::write(
        &cfg,
        "[grid]\ndim = 1\npoints = 32\nspacing = 0.5\n\
         [potential]\nkind = zero\n\
         [gp]\ncoupling = 1.0\ntrap = harmonic\ntol = 1e-7\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = gplab()
        .arg("groundstate")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let gs = read_json(&out.join("groundstate.json"));
    let e = gs["energy"]["total"].as_f64().unwrap();
    let mu = gs["mu"].as_f64().unwrap();
    let e_int = gs["energy"]["interaction"].as_f64().unwrap();
    assert!((mu - e - e_int).abs() < 1e-8);
    // the field file round-trips through the documented format
    let bytes = fs::read(out.join("groundstate.gpf")).unwrap();
    assert_eq!(&bytes[..4], b"GPF1");
}

#[test]
fn evolve_manybody_emits_monitor_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("mb.conf");
    fs::write(
        &cfg,
        "[grid]\ndim = 1\npoints = 8\nspacing = 0.5\n\
         [potential]\ndepth = 2.0\nradius = 1.0\ndr = 0.005\n\
         [gp]\ntrap = harmonic\ndt = 0.01\nt_final = 0.1\nsample_every = 5\ntol = 1e-7\n\
         [manybody]\nparticles = 2\ninit = correlated\n\
         [renorm]\ncutoff = 0.9\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = gplab()
        .arg("evolve-manybody")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("evolve_manybody.csv")).unwrap();
    assert!(csv.starts_with("t,depletion,n_perp,gronwall,energy,fidelity_to_condensate"));
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["pass"], true, "{report}");
    let bytes = fs::read(out.join("final_state.mbf")).unwrap();
    assert_eq!(&bytes[..4], b"MBF1");
}

#[test]
fn trapped_depletion_experiment_writes_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dep.conf");
    fs::write(
        &cfg,
        "[grid]\ndim = 1\npoints = 16\nspacing = 0.5\n\
         [potential]\ndepth = 2.0\nradius = 1.0\ndr = 0.01\n\
         [gp]\ntrap = harmonic\n\
         [manybody]\nparticles = 2\nn_values = 2,3\ninteraction_width = 2\ndepth_sweep = 0.5,1.0,2.0\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = gplab()
        .arg("experiment-trapped-depletion")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("trapped_depletion.csv")).unwrap();
    assert!(csv.starts_with("n,depletion,n_depletion,mb_energy,gp_energy"));
    assert_eq!(csv.lines().count(), 3);
    let report = read_json(&out.join("report.json"));
    assert_eq!(report["pass"], true, "{report}");
}
