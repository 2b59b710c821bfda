use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn qmachine(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmachine"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

struct Run {
    dir: TempDir,
}

impl Run {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn config(&self, name: &str, text: &str) -> String {
        fs::write(self.path(name), text).unwrap();
        name.to_string()
    }

    fn exec(&self, args: &[&str]) -> Output {
        qmachine(args, self.dir.path())
    }

    fn ok(&self, args: &[&str]) -> Table {
        let out = self.exec(args);
        assert!(
            out.status.success(),
            "qmachine {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let csv = args
            .windows(2)
            .find(|w| w[0] == "--out")
            .map(|w| w[1].to_string())
            .unwrap_or_else(|| format!("{}.csv", args[0]));
        Table::read(&self.path(&csv))
    }
}

/// Parsed CSV: header and data rows with the `flags` column kept as text.
struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Self {
        let text = fs::read_to_string(path).unwrap();
        let mut lines = text.lines().filter(|l| !l.starts_with('#'));
        let header = lines.next().unwrap().split(',').map(String::from).collect();
        let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
        Self { header, rows }
    }

    fn idx(&self, name: &str) -> usize {
        self.header
            .iter()
            .position(|h| h == name)
            .unwrap_or_else(|| panic!("no column {name}"))
    }

    fn col(&self, name: &str) -> Vec<f64> {
        let i = self.idx(name);
        self.rows.iter().map(|r| r[i].parse().unwrap()).collect()
    }

    fn text(&self, name: &str) -> Vec<String> {
        let i = self.idx(name);
        self.rows.iter().map(|r| r[i].clone()).collect()
    }
}

#[test]
fn unknown_key_is_a_config_error_with_position() {
    let run = Run::new();
    let cfg = run.config("bad.cfg", "# otto run\nr = 0.3\nomgea_h = 1\n");
    let out = run.exec(&["otto", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.cfg:3") && err.contains("omgea_h"), "{err}");
    assert!(!run.path("otto.csv").exists());
}

#[test]
fn other_config_errors_exit_with_two() {
    let run = Run::new();
    assert_eq!(run.exec(&["otto"]).status.code(), Some(2));
    assert_eq!(run.exec(&["relax", "--preset", "fig5a"]).status.code(), Some(2));
    assert_eq!(run.exec(&["otto", "--config", "missing.cfg"]).status.code(), Some(2));
    let cfg = run.config("grid.cfg", "sweep.param = r\nsweep.values = 0.1, nan\n");
    assert_eq!(run.exec(&["otto", "--config", &cfg]).status.code(), Some(2));
    let cfg = run.config("wrong.cfg", "experiment = relax\n");
    assert_eq!(run.exec(&["otto", "--config", &cfg]).status.code(), Some(2));
    // omega_c above omega_h is rejected by the cycle configuration
    let cfg = run.config("ratio.cfg", "omega_ratio = 1.5\n");
    assert_eq!(run.exec(&["otto", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn truncation_guard_exits_with_three() {
    let run = Run::new();
    let cfg = run.config("small.cfg", "fock_dim = 6\nr = 1.2\nt_end = 4\n");
    let out = run.exec(&["relax", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!run.path("relax.csv").exists());
}

#[test]
fn identical_config_gives_identical_bytes_and_the_echo_reruns() {
    let run = Run::new();
    let cfg = run.config("short.cfg", "t_end = 2\ndt = 0.1\n");
    let args = ["relax", "--preset", "fig6", "--config", &cfg];
    run.ok(&[&args[..], &["--out", "a.csv"]].concat());
    run.ok(&[&args[..], &["--out", "b.csv"]].concat());
    let read = |n: &str| fs::read(run.path(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    let ma = String::from_utf8(read("a.manifest.json")).unwrap();
    let mb = String::from_utf8(read("b.manifest.json")).unwrap();
    assert_eq!(ma.replace("a.csv", "b.csv"), mb);
    assert!(!ma.contains("wall_time"));

    let manifest: serde_json::Value = serde_json::from_str(&ma).unwrap();
    let echo = manifest["config"].as_str().unwrap();
    let cfg = run.config("echo.cfg", echo);
    run.ok(&["relax", "--config", &cfg, "--out", "c.csv"]);
    assert_eq!(read("a.csv"), read("c.csv"));

    run.ok(&[&args[..], &["--out", "d.csv", "--record-timing"]].concat());
    let md: serde_json::Value = serde_json::from_slice(&read("d.manifest.json")).unwrap();
    assert!(md["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn fig5a_preset_orders_the_bounds() {
    let run = Run::new();
    let t = run.ok(&["otto", "--preset", "fig5a", "--out", "fig5a.csv"]);
    assert_eq!(t.rows.len(), 20);
    let (eta, eta_max, eta_sigma) = (t.col("eta"), t.col("eta_max"), t.col("eta_sigma"));
    for i in 0..20 {
        assert!(eta[i] <= eta_max[i] + 1e-9);
        assert!(eta_max[i] <= eta_sigma[i].min(1.0) + 1e-9);
    }
    assert!(eta_sigma.iter().any(|s| *s > 1.0));
    let x = t.col("sweep_value");
    assert!((x[0] - 0.05).abs() < 1e-15 && (x[19] - 0.95).abs() < 1e-15);
    let manifest = fs::read_to_string(run.path("fig5a.manifest.json")).unwrap();
    assert!(manifest.contains("\"preset\": \"fig5a\""));
}

#[test]
fn fig5b_preset_starts_at_the_plain_otto_cycle() {
    let run = Run::new();
    let t = run.ok(&["otto", "--preset", "fig5b", "--out", "fig5b.csv"]);
    let (eta, eta_max, eta_sigma, carnot) = (t.col("eta"), t.col("eta_max"), t.col("eta_sigma"), t.col("eta_carnot"));
    // r = 0: Otto efficiency 1 - omega_c/omega_h, both bounds at Carnot
    assert!((eta[0] - 0.5).abs() < 1e-12);
    assert!((eta_max[0] - carnot[0]).abs() < 1e-12 && (eta_sigma[0] - carnot[0]).abs() < 1e-12);
    assert!(eta.windows(2).all(|w| w[1] > w[0]));
    assert!(eta_max.iter().all(|e| *e < 1.0));
    assert!(*eta_sigma.last().unwrap() > 1.0);
}

#[test]
fn otto_single_point_and_flagged_rows() {
    let run = Run::new();
    let cfg = run.config("one.cfg", "t_c = 1\nt_h = 3\nomega_ratio = 0.05\n");
    let t = run.ok(&["otto", "--config", &cfg]);
    assert_eq!(t.rows.len(), 1);
    assert_eq!(t.text("sweep_value"), vec![String::new()]);
    assert_eq!(t.text("regime"), vec!["no_engine".to_string()]);
    assert!(t.text("flags")[0].contains("no_engine"));
    assert!(t.col("eta")[0].is_nan());
}

#[test]
fn sweep_rows_follow_grid_order() {
    let run = Run::new();
    let cfg = run.config("grid.cfg", "sweep.param = r\nsweep.values = 0.9, 0.1, 0.5\n");
    let t = run.ok(&["otto", "--config", &cfg]);
    assert_eq!(t.col("sweep_value"), vec![0.9, 0.1, 0.5]);
}

#[test]
fn gaussian_backend_matches_the_closed_form() {
    let run = Run::new();
    let cfg = run.config(
        "g.cfg",
        "backend = gaussian\nt_c = 0.4\nt_h = 1.2\nsweep.param = omega_ratio\nsweep.values = 0.3, 0.6\n",
    );
    let t = run.ok(&["otto", "--config", &cfg]);
    for (a, b) in t.col("eta").iter().zip(t.col("eta_numeric")) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
    for (a, b) in t.col("net_work").iter().zip(t.col("net_work_numeric")) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn fig6_preset_reaches_squeezed_vacuum_energy() {
    let run = Run::new();
    let t = run.ok(&["relax", "--preset", "fig6"]);
    let e = t.col("energy");
    assert!(e.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    let target = 0.5f64.sinh().powi(2);
    assert!((e.last().unwrap() - target).abs() < 1e-3 * target);
    // pure state at both ends, the energy ends as ergotropy
    assert!(t.col("entropy").last().unwrap().abs() < 1e-5);
    assert!((t.col("ergotropy").last().unwrap() - target).abs() < 1e-3 * target);
    assert!(t.col("trace_error").iter().all(|x| *x < 1e-10));
}

#[test]
fn unsqueezed_relaxation_has_no_ergotropy() {
    let run = Run::new();
    let cfg = run.config(
        "th.cfg",
        "r = 0\nn_bar = 0.2\ninitial = thermal\ninitial_value = 0.5\nt_end = 5\n",
    );
    let t = run.ok(&["relax", "--config", &cfg]);
    assert!(t.col("ergotropy").iter().all(|w| w.abs() <= 1e-10));
}

#[test]
fn fig7_preset_identity_and_ordering() {
    let run = Run::new();
    let t = run.ok(&["catalysis", "--preset", "fig7"]);
    assert!(t.col("identity").iter().all(|r| *r <= 1e-8));
    let (pumped, bare, cap) = (t.col("eta_pumped"), t.col("eta_unpumped"), t.col("eta_max_ref"));
    let carnot = 1.0 - 0.6;
    for i in 1..pumped.len() {
        assert!(pumped[i] > bare[i]);
        assert!(pumped[i] >= pumped[i - 1] - 1e-12);
        assert!(pumped[i] <= cap[i] && cap[i] <= carnot + 1e-9);
    }

    let cfg = run.config("c.cfg", "subfigure = c\n");
    let t = run.ok(&["catalysis", "--preset", "fig7", "--config", &cfg, "--out", "c.csv"]);
    let (lin, quad) = (t.col("ergotropy_ratio_linear"), t.col("ergotropy_ratio_quadratic"));
    assert!(lin.iter().zip(&quad).skip(1).all(|(l, q)| q > l && *l > 1.0));

    let cfg = run.config("a.cfg", "subfigure = a\n");
    let t = run.ok(&["catalysis", "--preset", "fig7", "--config", &cfg, "--out", "a.csv"]);
    assert_eq!(t.header[0], "nu");
    let (none, lin, quad) = (t.col("power_none"), t.col("power_linear"), t.col("power_quadratic"));
    for i in 0..t.rows.len() {
        if !t.text("flags")[i].contains("no_gain") {
            assert!(quad[i] > lin[i] && lin[i] > none[i]);
        }
    }
}

#[test]
fn zero_pump_rate_is_the_unpumped_engine() {
    let run = Run::new();
    let cfg = run.config("k0.cfg", "kappa_ratio = 0\npoints = 11\n");
    let t = run.ok(&["catalysis", "--preset", "fig7", "--config", &cfg]);
    for (a, b) in t.col("eta_pumped").iter().zip(t.col("eta_unpumped")) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn fig8_preset_tight_bound_saturates() {
    let run = Run::new();
    let cfg = run.config("f8.cfg", "t_end = 50\n");
    let t = run.ok(&["carnot", "--preset", "fig8", "--config", &cfg]);
    let last = t.rows.len() - 1;
    let (ds, ed, qp) = (
        t.col("delta_S")[last],
        t.col("E_d_over_T")[last],
        t.col("Q_prime_over_T")[last],
    );
    assert_eq!(t.col("t")[last], 50.0);
    let tight = (ds - qp).abs() / ds.abs();
    assert!(tight <= 0.02);
    assert!((ds - ed).abs() / ds.abs() > 5.0 * tight);
}

#[test]
fn unsqueezed_isotherm_bounds_coincide() {
    let run = Run::new();
    let cfg = run.config("r0.cfg", "r = 0\nt_end = 10\nfock_dim = 30\n");
    let t = run.ok(&["carnot", "--preset", "fig8", "--config", &cfg]);
    for (a, b) in t.col("E_d_over_T").iter().zip(t.col("Q_prime_over_T")) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn bounds_hierarchy_for_an_inverted_qubit() {
    let run = Run::new();
    let t = run.ok(&["bounds", "--config", &run.config("q.cfg", "initial = inverted\n")]);
    assert!(t.col("sigma").iter().all(|s| *s >= -1e-9));
    let (ds, sl, tb) = (t.col("delta_S"), t.col("bound_second_law"), t.col("bound_tight"));
    for i in 0..ds.len() {
        assert!(ds[i] >= tb[i] - 1e-9 && tb[i] >= sl[i] - 1e-9);
    }
    assert!(*tb.last().unwrap() > sl.last().unwrap() + 0.1);
}

#[test]
fn passive_start_makes_bounds_coincide() {
    let run = Run::new();
    let cfg = run.config("p.cfg", "n_bar = 0.5\ninitial = thermal\ninitial_value = 0.1\n");
    let t = run.ok(&["bounds", "--config", &cfg]);
    for (a, b) in t.col("bound_second_law").iter().zip(t.col("bound_tight")) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn squeezed_bath_bounds_stay_ordered() {
    let run = Run::new();
    let cfg = run.config(
        "s.cfg",
        "system = oscillator\nr = 0.2\nn_bar = 0.3\ninitial = coherent\ninitial_value = 0.5\nt_end = 10\ndt = 0.1\n",
    );
    let t = run.ok(&["bounds", "--config", &cfg]);
    assert!(t.text("flags").iter().all(|f| f.is_empty()));
    let (ds, sl, tb) = (t.col("delta_S"), t.col("bound_second_law"), t.col("bound_tight"));
    for i in 0..ds.len() {
        assert!(ds[i] >= tb[i] - 1e-8 && ds[i] >= sl[i] - 1e-8);
    }
}

#[test]
fn seed_selects_the_random_initial_state() {
    let run = Run::new();
    let a = run.config("a.cfg", "initial = random\nseed = 5\nt_end = 3\n");
    let b = run.config("b.cfg", "initial = random\nseed = 6\nt_end = 3\n");
    run.ok(&["bounds", "--config", &a, "--out", "a1.csv"]);
    run.ok(&["bounds", "--config", &a, "--out", "a2.csv"]);
    run.ok(&["bounds", "--config", &b, "--out", "b.csv"]);
    let read = |n: &str| fs::read(run.path(n)).unwrap();
    assert_eq!(read("a1.csv"), read("a2.csv"));
    assert_ne!(read("a1.csv"), read("b.csv"));
}
