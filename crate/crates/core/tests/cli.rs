use std::process::{Command, Output};

fn mlmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlmc")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn inner_sweep_row_matches_table_plan() {
    let o = mlmc(&["sweep", "--m-list", "7", "--n-ref", "2000", "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = stdout(&o);
    assert!(csv.starts_with("M,L,M_pow_L,RE_mlmc,time_mlmc_s,cost_units_mlmc,RE_mc,time_mc_s,cost_units_mc,seed\n"));
    let r = &rows(&csv)[0];
    assert_eq!(&r[..3], ["7", "4", "2401"]);
    assert_eq!(r[5], "7240");
    assert_eq!(r[8], (200 * 2401).to_string());
}

#[test]
fn matmul_sweep_row_matches_table_plan() {
    let o = mlmc(&["sweep", "--mode", "matmul", "--m-list", "10", "--n-ref", "200", "--no-timing"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = &rows(&stdout(&o))[0];
    assert_eq!(&r[..3], ["10", "3", "1000"]);
    assert_eq!(r[4], "");
    assert_eq!(r[5], (3660 * 100).to_string());
}

#[test]
fn constant_model_sweep_has_zero_error() {
    let o = mlmc(&[
        "sweep", "--model", "constant-ones", "--target", "identity", "--m-list", "2,5,11", "--reps", "2",
        "--n", "100",
    ]);
    assert!(o.status.success());
    let rows = rows(&stdout(&o));
    assert_eq!(rows.len(), 6);
    for r in rows {
        assert_eq!(r[3].parse::<f64>().unwrap(), 0.0);
        assert_eq!(r[6].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("out.csv");
    std::fs::write(
        &cfg,
        format!(
            "# constant sweep\nmodel = constant-ones\ntarget = identity\nn = 64\nm_list = 3,4\nout = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let o = mlmc(&["sweep", "--config", cfg.to_str().unwrap(), "--m-list", "8"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    let rows = rows(&csv);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "8");
    assert_eq!(rows[0][1], "3");
}

#[test]
fn exit_codes() {
    assert_eq!(mlmc(&["sweep", "--model", "nope"]).status.code(), Some(1));
    assert_eq!(mlmc(&["estimate", "--target", "nope"]).status.code(), Some(1));
    assert_eq!(mlmc(&["sweep", "--m-list", "1"]).status.code(), Some(1));
    assert_eq!(mlmc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(mlmc(&["--help"]).status.code(), Some(0));
    let o = mlmc(&[
        "sweep", "--model", "constant-ones", "--target", "identity", "--n", "8", "--m-list", "2", "--out", "/nonexistent/dir/x.csv",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(mlmc(&["sweep", "--config", "/nonexistent/cfg"]).status.code(), Some(3));
}

#[test]
fn oracle_pass_and_negative_control() {
    let o = mlmc(&["oracle"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0 failed"));
    let o = mlmc(&["oracle", "--corrupt-rescaling"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("inner ramp n=1"));
}

#[test]
fn fm_curve_minimum_at_eleven() {
    let o = mlmc(&["fm-curve", "--m-min", "2", "--m-max", "20"]);
    assert!(o.status.success());
    let csv = stdout(&o);
    let best = rows(&csv)
        .into_iter()
        .map(|r| (r[0].clone(), r[1].parse::<f64>().unwrap()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    assert_eq!(best.0, "11");
    assert_eq!(mlmc(&["fm-curve", "--m-min", "9", "--m-max", "3"]).status.code(), Some(1));
}

#[test]
fn estimate_prints_level_table() {
    let o = mlmc(&["estimate", "--m-list", "7", "--seed", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("M=7 L=4"));
    let levels = text.lines().filter(|l| l.trim_start().starts_with(char::is_numeric)).count();
    assert_eq!(levels, 5);
    let value: f64 = text.lines().find_map(|l| l.strip_prefix("value = ")).unwrap().parse().unwrap();
    assert!(value != 0.0);

    let o = mlmc(&["estimate", "--model", "constant-ones", "--target", "identity", "--m-list", "5"]);
    let text = stdout(&o);
    assert!(text.contains("value = 1000\n"));
}

#[test]
fn sweep_is_byte_identical_across_runs() {
    let args = ["sweep", "--m-list", "3,7", "--reps", "2", "--n-ref", "500", "--n", "200", "--no-timing"];
    let a = mlmc(&[&args[..], &["--threads", "1"]].concat());
    let b = mlmc(&[&args[..], &["--threads", "4"]].concat());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}
