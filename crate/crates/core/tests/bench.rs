use ldago::harness::{
    emit_reports, parse_diagnostics, parse_table2, run_bench, BenchPlan, Method,
};

fn plan(settings: &[&str], replicates: usize) -> BenchPlan {
    BenchPlan {
        replicates,
        n_test: 2000,
        ..BenchPlan::desk(
            settings.iter().map(|s| s.to_string()).collect(),
            Method::ALL.to_vec(),
            0,
        )
    }
}

#[test]
fn no_signal_setting_is_a_coin_flip_for_everyone() {
    let result = run_bench(&plan(&["A4"], 2)).unwrap();
    for m in Method::ALL {
        for e in result.errors("A4", m) {
            assert!((0.45..=0.55).contains(&e), "{m}: {e}");
        }
    }
}

#[test]
fn sparse_signal_favours_the_learned_precision() {
    let result = run_bench(&plan(&["C4"], 2)).unwrap();
    let go = result.mean_error("C4", Method::LdaGo);
    assert!(go <= 0.12, "{go}");
    assert!(go < result.mean_error("C4", Method::Lda));
    assert!(result.winners("C4").contains(&Method::LdaGo));
}

#[test]
fn reports_are_written_and_parse_back() {
    let result = run_bench(&plan(&["B1", "E2"], 2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_reports(&result, dir.path()).unwrap();
    let table = parse_table2(&std::fs::read_to_string(dir.path().join("table2.csv")).unwrap()).unwrap();
    assert_eq!(table.len(), 2 * Method::ALL.len());
    assert!(table.iter().all(|r| r.n_replicates == 2));
    let diag =
        parse_diagnostics(&std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap()).unwrap();
    assert_eq!(diag.len(), 4);
    let summary = std::fs::read_to_string(dir.path().join("summary.md")).unwrap();
    assert!(summary.contains("B1") && summary.contains("E2"));
}
