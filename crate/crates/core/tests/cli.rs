mod common;

use std::path::Path;
use std::process::{Command, Output};

use ppp::analysis::column_names;
use ppp::SampleStore;

fn ppp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppp"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

const SIM: &[&str] = &[
    "simulate",
    "--k",
    "2",
    "--means",
    "0,2",
    "--sds",
    "1,1",
    "--weights",
    "0.5,0.5",
    "--n",
    "100",
    "--seed",
    "6",
];

#[test]
fn simulate_writes_requested_rows_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a.csv", "b.csv"] {
        let o = ppp(dir.path(), &[SIM, &["--out", out]].concat());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = read(dir.path().join("a.csv"));
    assert_eq!(a, read(dir.path().join("b.csv")));
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next(), Some("y"));
    assert_eq!(text.lines().count(), 101);
}

#[test]
fn simulate_rejects_bad_flags() {
    let dir = tempfile::tempdir().unwrap();
    let run = |extra: &[&str]| {
        code(&ppp(
            dir.path(),
            &[&["simulate", "--out", "x.csv"], extra].concat(),
        ))
    };
    assert_eq!(
        run(&[
            "--k",
            "2",
            "--means",
            "0,2",
            "--sds",
            "1,1",
            "--weights",
            "0.5,0.5",
            "--n",
            "0"
        ]),
        1
    );
    assert_eq!(
        run(&[
            "--k",
            "2",
            "--means",
            "0",
            "--sds",
            "1,1",
            "--weights",
            "0.5,0.5",
            "--n",
            "5"
        ]),
        1
    );
    assert_eq!(
        run(&[
            "--k",
            "2",
            "--means",
            "0,2",
            "--sds",
            "1,1",
            "--weights",
            "0.5,0.6",
            "--n",
            "5"
        ]),
        1
    );
    assert_eq!(
        run(&[
            "--k",
            "2",
            "--means",
            "0,2",
            "--sds",
            "1,1",
            "--weights",
            "0.5,0.5000000001",
            "--n",
            "5"
        ]),
        0
    );
    assert_eq!(run(&["--k", "2"]), 1);
}

fn simulated(dir: &Path) {
    assert_eq!(code(&ppp(dir, &[SIM, &["--out", "data.csv"]].concat())), 0);
}

fn fit(dir: &Path, penalty: &str, out: &str, extra: &[&str]) -> Output {
    ppp(
        dir,
        &[
            &[
                "fit",
                "--data",
                "data.csv",
                "--k",
                "2",
                "--penalty",
                penalty,
                "--iters",
                "600",
                "--burnin",
                "100",
                "--thin",
                "5",
                "--seed",
                "3",
                "--out",
                out,
            ],
            extra,
        ]
        .concat(),
    )
}

#[test]
fn fit_is_deterministic_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path());
    for out in ["a.csv", "b.csv"] {
        assert_eq!(code(&fit(dir.path(), "absdiff:mu:s=1", out, &[])), 0);
    }
    assert_eq!(
        read(dir.path().join("a.csv")),
        read(dir.path().join("b.csv"))
    );
    let store = SampleStore::read_csv(dir.path().join("a.csv")).unwrap();
    assert_eq!(store.records.len(), 100);
    let report = String::from_utf8(read(dir.path().join("a_report.txt"))).unwrap();
    assert!(report.contains("penalty=absdiff:mu:s=1"));
    assert!(report.contains("acceptance_rate="));
    assert!(report.contains("kappa="));
}

#[test]
fn s_zero_matches_none() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path());
    assert_eq!(code(&fit(dir.path(), "none", "none.csv", &[])), 0);
    assert_eq!(code(&fit(dir.path(), "absdiff:mu:s=0", "zero.csv", &[])), 0);
    for file in ["none_report.txt", "zero_report.txt"] {
        let report = String::from_utf8(read(dir.path().join(file))).unwrap();
        assert!(report.contains("acceptance_rate=1.000000"), "{report}");
    }
    assert_eq!(
        read(dir.path().join("none.csv")),
        read(dir.path().join("zero.csv"))
    );
}

#[test]
fn fit_errors_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path());
    let o = fit(dir.path(), "absdiff:mu", "x.csv", &[]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("absdiff:<mu|sigma2|pi>:s=<real>"), "{err}");
    let o = ppp(
        dir.path(),
        &["fit", "--data", "missing.csv", "--k", "2", "--out", "x.csv"],
    );
    assert_eq!(code(&o), 2);
    // A gap wider than the data range leaves no admissible starting state.
    assert_eq!(
        code(&fit(dir.path(), "threshold:mu:delta=1000", "x.csv", &[])),
        2
    );
    assert_eq!(code(&fit(dir.path(), "maxmin", "x.csv", &[])), 1);
}

#[test]
fn multiple_chains_get_their_own_files() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path());
    assert_eq!(
        code(&fit(dir.path(), "none", "run.csv", &["--chains", "3"])),
        0
    );
    let stores: Vec<_> = (0..3)
        .map(|i| SampleStore::read_csv(dir.path().join(format!("run_chain{i}.csv"))).unwrap())
        .collect();
    assert_ne!(stores[0], stores[1]);
    // Chain i is the single chain with seed + i.
    assert_eq!(
        code(&ppp(
            dir.path(),
            &[
                "fit",
                "--data",
                "data.csv",
                "--k",
                "2",
                "--iters",
                "600",
                "--burnin",
                "100",
                "--thin",
                "5",
                "--seed",
                "5",
                "--out",
                "single.csv"
            ]
        )),
        0
    );
    assert_eq!(
        read(dir.path().join("run_chain2.csv")),
        read(dir.path().join("single.csv"))
    );
}

#[test]
fn config_file_merges_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path());
    std::fs::write(
        dir.path().join("run.conf"),
        "# shared settings\ndata=data.csv\nk=2\niters=600\nburnin=100\nthin=5\nseed=3\npenalty=absdiff:mu:s=2\nkappa=0.5\n",
    )
    .unwrap();
    let o = ppp(
        dir.path(),
        &[
            "fit",
            "--config",
            "run.conf",
            "--penalty",
            "absdiff:mu:s=1",
            "--out",
            "c.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = String::from_utf8(read(dir.path().join("c_report.txt"))).unwrap();
    assert!(report.contains("penalty=absdiff:mu:s=1"));
    assert!(report.contains("kappa=0.5"));
    let o = ppp(
        dir.path(),
        &[
            "fit",
            "--config",
            "run.conf",
            "--penalty",
            "absdiff:mu:s=1",
            "--prior",
            "kappa=0.25",
            "--out",
            "d.csv",
        ],
    );
    assert_eq!(code(&o), 0);
    let report = String::from_utf8(read(dir.path().join("d_report.txt"))).unwrap();
    assert!(report.contains("kappa=0.25"));
    // Same settings given as flags only produce identical draws.
    assert_eq!(
        code(&fit(
            dir.path(),
            "absdiff:mu:s=1",
            "e.csv",
            &["--prior", "kappa=0.5"]
        )),
        0
    );
    assert_eq!(
        read(dir.path().join("c.csv")),
        read(dir.path().join("e.csv"))
    );

    std::fs::write(dir.path().join("bad.conf"), "itters=5\n").unwrap();
    let o = ppp(
        dir.path(),
        &[
            "fit", "--config", "bad.conf", "--data", "data.csv", "--k", "2", "--out", "x.csv",
        ],
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn analyze_addresses_every_column_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    simulated(dir.path());
    assert_eq!(code(&fit(dir.path(), "absdiff:mu:s=1", "s.csv", &[])), 0);
    let mut args = vec![
        "analyze",
        "--samples",
        "s.csv",
        "--relabel",
        "ic-mu",
        "--out-prefix",
    ];
    let names = column_names(2);
    let mut kde: Vec<&str> = Vec::new();
    for n in &names {
        if n != "accept_mu" {
            kde.extend(["--kde", n.as_str()]);
        }
    }
    let tail = [
        "--tailprob",
        "absdiff_mu<0.5&max_sigma2>2",
        "--grid2d",
        "absdiff_mu:max_sigma2",
        "--svg",
    ];
    for prefix in ["a/out", "b/out"] {
        let mut full = args.clone();
        full.push(prefix);
        full.extend(&kde);
        full.extend(tail);
        let o = ppp(dir.path(), &full);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for entry in std::fs::read_dir(dir.path().join("a")).unwrap() {
        let name = entry.unwrap().file_name();
        let a = read(dir.path().join("a").join(&name));
        let b = read(dir.path().join("b").join(&name));
        assert_eq!(a, b, "{name:?}");
    }
    let summary = String::from_utf8(read(dir.path().join("a/out_summary.txt"))).unwrap();
    assert!(summary.contains("tailprob absdiff_mu<0.5&max_sigma2>2 = "));
    assert!(dir.path().join("a/out_kde_mu_pooled.csv").exists());
    assert!(dir
        .path()
        .join("a/out_grid2d_absdiff_mu_max_sigma2.svg")
        .exists());

    args.push("c/out");
    args.extend(["--kde", "mu_3"]);
    assert_eq!(code(&ppp(dir.path(), &args)), 1);
}

#[test]
fn oracle_exit_status_follows_the_budget() {
    let root = common::workspace_root();
    let dir = tempfile::tempdir().unwrap();
    let data = root.join("data/oracle6.csv");
    let data = data.to_str().unwrap();
    let base = [
        "oracle",
        "--data",
        data,
        "--iters",
        "3000",
        "--burnin",
        "100",
        "--walker-steps",
        "3000",
        "--bins",
        "41",
    ];
    let o = ppp(dir.path(), &[&base[..], &["--out-prefix", "a"]].concat());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stdout).contains("VIOLATED"));
    let o = ppp(
        dir.path(),
        &[
            &base[..],
            &[
                "--out-prefix",
                "b",
                "--budget",
                "1.01",
                "--budget-chain-walker",
                "1.01",
            ],
        ]
        .concat(),
    );
    assert_eq!(code(&o), 0);
    for f in ["_grid.csv", "_chain.csv", "_walker.csv"] {
        assert_eq!(
            read(dir.path().join(format!("a{f}"))),
            read(dir.path().join(format!("b{f}")))
        );
    }
    let o = ppp(
        dir.path(),
        &["oracle", "--data", data, "--penalty", "maxmin"],
    );
    assert_eq!(code(&o), 1);
}

#[test]
fn repro_runs_flag_lists() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("list.txt"),
        "# tiny\nsimulate --k 1 --means 3 --sds 1 --weights 1 --n 20 --seed 2 --out $OUT/d.csv\n\
         fit --data $OUT/d.csv --k 1 --iters 50 --burnin 10 --thin 1 --out $OUT/s.csv\n",
    )
    .unwrap();
    let o = ppp(dir.path(), &["repro", "list.txt", "--out-dir", "o"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        SampleStore::read_csv(dir.path().join("o/s.csv"))
            .unwrap()
            .records
            .len(),
        40
    );
}
