use std::collections::HashMap;

use gosa_cli::run;

struct Output {
    code: i32,
    stdout: String,
    stderr: String,
}

fn gosa(args: &str) -> Output {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("gosa").chain(args.split_whitespace());
    let code = run(argv, &mut out, &mut err);
    Output { code, stdout: String::from_utf8(out).unwrap(), stderr: String::from_utf8(err).unwrap() }
}

fn records(csv_text: &str) -> Vec<HashMap<String, String>> {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    rdr.records()
        .map(|r| header.iter().cloned().zip(r.unwrap().iter().map(String::from)).collect())
        .collect()
}

fn num(row: &HashMap<String, String>, col: &str) -> f64 {
    row[col].parse().unwrap_or_else(|_| panic!("{col} = '{}'", row[col]))
}

#[test]
fn quantile_sweep_row_count() {
    let o = gosa("estimate --model ishigami --contrast quantile --alpha-grid 0.01:0.99:99 --n1 200 --n2 200 --seed 0 --replicates 1");
    assert_eq!(o.code, 0, "{}", o.stderr);
    let rows = records(&o.stdout);
    assert_eq!(rows.len(), 297);
    // Sorted by parameter, then subset.
    assert_eq!(rows[0]["subset"], "1");
    assert_eq!(rows[2]["subset"], "3");
    assert_eq!(num(&rows[3], "param"), 0.02);
    assert!(rows.iter().all(|r| r["run_id"] == rows[0]["run_id"]));
}

#[test]
fn example1_median_row() {
    let o = gosa("estimate --model example1 --contrast quantile --alpha 0.5 --subset 1 --n1 4000 --n2 4000 --replicates 1");
    assert_eq!(o.code, 0);
    let rows = records(&o.stdout);
    assert_eq!(rows.len(), 1);
    assert!((num(&rows[0], "estimate") - 0.307).abs() < 0.03);
    assert_eq!(rows[0]["degenerate_flag"], "0");
    assert_eq!(rows[0]["stderr"], "0.0000000000000000e0");
}

#[test]
fn degenerate_rows_and_strict_exit() {
    let o = gosa("estimate --model example2 --a 1.0 --contrast excess --t 0 --n1 100");
    assert_eq!(o.code, 0);
    let rows = records(&o.stdout);
    assert!(rows.iter().all(|r| r["degenerate_flag"] == "1" && r["estimate"].is_empty()));
    let strict = gosa("estimate --model example2 --a 1.0 --contrast excess --t 0 --n1 100 --strict");
    assert_eq!(strict.code, 2);
    assert_eq!(strict.stdout, o.stdout);
}

#[test]
fn oracle_subcommand_examples() {
    let rows = records(&gosa("oracle --example 1 --alpha 0.9").stdout);
    assert!(num(&rows[0], "estimate") > num(&rows[1], "estimate"));
    assert!(rows[0]["n1"].is_empty() && rows[0]["B"].is_empty());
    assert_eq!(num(&rows[0], "stderr"), 0.0);

    let o = gosa("oracle --example 2 --a 0.3 --t 2");
    assert_eq!(o.code, 0);
    for r in records(&o.stdout) {
        let v = num(&r, "estimate");
        assert!(v.is_finite() && (0.0..=1.0).contains(&v));
    }
    let sobol = records(&gosa("oracle --example 2 --a 0.3 --contrast mean").stdout);
    assert!((num(&sobol[0], "estimate") - 0.09 / 1.09).abs() < 1e-15);
    assert!((num(&sobol[1], "estimate") - 1.0 / 1.09).abs() < 1e-15);

    let ish = records(&gosa("oracle --ishigami").stdout);
    let got: Vec<f64> = ish.iter().map(|r| (num(r, "estimate") * 1e4).round() / 1e4).collect();
    assert_eq!(got, [0.3139, 0.4424, 0.0]);

    let ml = records(&gosa("oracle --example gaussian-ml --theta 0").stdout);
    assert_eq!((num(&ml[0], "estimate"), num(&ml[1], "estimate")), (0.0, 1.0));
}

#[test]
fn compare_joins_oracle() {
    let o = gosa("compare --model example2 --a 2 --contrast mean --n1 1000 --n2 1000 --replicates 2");
    assert_eq!(o.code, 0, "{}", o.stderr);
    let rows = records(&o.stdout);
    for r in &rows {
        let e = num(r, "estimate");
        let orc = num(r, "oracle");
        assert!((num(r, "abs_error") - (e - orc).abs()).abs() < 1e-15);
        assert!((num(r, "z_score") - (e - orc) / num(r, "stderr")).abs() < 1e-9);
    }
    assert_eq!(num(&rows[0], "oracle"), 0.8);
}

#[test]
fn compare_rejects_unsupported_pairs() {
    let o = gosa("compare --model ishigami --contrast median");
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("supported pairs") && o.stderr.contains("example1+quantile"));
}

#[test]
fn usage_errors_list_valid_names() {
    let o = gosa("estimate --model nope");
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("ishigami"));
    let o = gosa("estimate --model example1 --contrast nope");
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("quantile-tail"));
    assert_eq!(gosa("estimate --model example1 --subset 3").code, 1);
    assert_eq!(gosa("estimate --model example1 --paired --fresh-inner").code, 1);
    assert_eq!(gosa("estimate --unknown-flag").code, 1);
    assert_eq!(gosa("estimate --model example1 --contrast quantile --alpha 1.5").code, 1);
    assert_eq!(gosa("--help").code, 0);
}

#[test]
fn group_subsets_and_modes() {
    let o = gosa("estimate --model example2 --subset 1,2 --subset 2 --n1 200 --n2 50 --replicates 1");
    let rows = records(&o.stdout);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["subset"], "1,2");
    assert!((num(&rows[0], "estimate") - 1.0).abs() < 1e-12);
    assert!(o.stdout.contains("\"1,2\""));

    let p = records(&gosa("estimate --model ishigami --paired --n1 300 --replicates 1").stdout);
    assert!(p.iter().all(|r| r["mode"] == "paired"));
    let f = records(&gosa("estimate --model ishigami --fresh-inner --n1 50 --n2 20 --replicates 1").stdout);
    assert!(f.iter().all(|r| r["mode"] == "fresh-inner"));
}

#[test]
fn functional_contrasts_record_their_grids() {
    let o = gosa("estimate --model example1 --contrast prob-tail --t 0 --grid-spec 0:8:81 --n1 200 --replicates 1");
    assert_eq!(o.code, 0, "{}", o.stderr);
    let rows = records(&o.stdout);
    assert!(rows[0]["grid"].contains("0:8:81"), "{}", rows[0]["grid"]);
    let o = gosa("estimate --model example1 --contrast kde --bandwidth 0.3 --grid-spec -8:8:161 --n1 100 --replicates 1");
    assert_eq!(o.code, 0, "{}", o.stderr);
    let o = gosa("estimate --model example1 --contrast basis --order 6 --support -6:6 --n1 100 --replicates 1");
    assert_eq!(o.code, 0, "{}", o.stderr);
    let o = gosa("estimate --model example1 --contrast quantile-tail --alpha 0.8 --grid-spec 0.8:0.99:20 --n1 100 --replicates 1");
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert_eq!(gosa("estimate --model example1 --contrast kde --bandwidth 0.3").code, 1);
}

#[test]
fn out_file_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("rows.csv");
    std::fs::write(&cfg, "# sweep\nmodel = example1\ncontrast = quantile\nalpha = 0.3\nn1 = 150\nseed = 4\nreplicates = 1\n").unwrap();
    let o = gosa(&format!("estimate --config {} --seed 9 --out {}", cfg.display(), out.display()));
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.is_empty());
    let rows = records(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["seed"], "9");
    assert_eq!(rows[0]["n1"], "150");
    let direct = gosa("estimate --model example1 --contrast quantile --alpha 0.3 --n1 150 --seed 9 --replicates 1");
    assert_eq!(direct.stdout, std::fs::read_to_string(&out).unwrap());
}

#[test]
fn output_is_identical_across_thread_counts() {
    let base = "estimate --model ishigami --contrast quantile --alpha-grid 0.1:0.9:5 --n1 150 --n2 150 --replicates 2 --seed 3";
    let one = gosa(&format!("{base} --threads 1")).stdout;
    for t in [2, 8] {
        assert_eq!(one, gosa(&format!("{base} --threads {t}")).stdout);
    }
}
