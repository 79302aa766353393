use rbfprice::harness::{
    convergence_study, price, table_run, timing_study, Method, RunConfig, RunRequest, SolverOptions,
};
use rbfprice::models::builtin;
use rbfprice::Error;

fn options(workers: usize, warm_start: bool) -> SolverOptions {
    SolverOptions {
        workers,
        warm_start,
        ..SolverOptions::default()
    }
}

fn run(problem: &str, method: Method, ns: usize, opts: SolverOptions) -> rbfprice::harness::SolveReport {
    price(&RunRequest::builtin(problem, method, ns).unwrap().with_options(opts)).unwrap()
}

fn parse_csv(bytes: &[u8]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(bytes);
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn warm_start_does_not_cost_iterations() {
    for method in [Method::RbfFd, Method::RbfPum] {
        let warm = run("qlsv1", method, 40, options(1, true));
        let cold = run("qlsv1", method, 40, options(1, false));
        assert!(
            warm.gmres_iterations <= cold.gmres_iterations,
            "{method}: {} warm vs {} cold",
            warm.gmres_iterations,
            cold.gmres_iterations
        );
        for (a, b) in warm.values.iter().zip(&cold.values) {
            assert!((a - b).abs() < 1e-6);
        }
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let fd: Vec<Vec<f64>> = [1, 1, 2, 3]
        .iter()
        .map(|&w| run("sabr2", Method::RbfFd, 20, options(w, true)).values)
        .collect();
    assert!(fd.windows(2).all(|w| w[0] == w[1]), "{fd:?}");

    let pum: Vec<Vec<f64>> = [1, 1, 3]
        .iter()
        .map(|&w| run("qlsv1", Method::RbfPum, 40, options(w, true)).values)
        .collect();
    for v in &pum[1..] {
        for (a, b) in v.iter().zip(&pum[0]) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn reports_carry_errors_only_with_references() {
    let with = run("qlsv1", Method::RbfFd, 20, options(1, true));
    let without = run("qlsv2", Method::RbfFd, 20, options(1, true));
    assert!(with.error.is_some() && without.error.is_none());
    assert_eq!(with.nodes, 200);
    assert_eq!(with.nt, 40);
    assert_eq!(with.steps.len(), 40);
    assert_eq!(with.factorizations, 1);
    assert!(with.values.iter().all(|v| v.is_finite()));

    let mut buf = Vec::new();
    with.write_csv(&mut buf).unwrap();
    let (header, rows) = parse_csv(&buf);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    for i in 0..3 {
        let v: f64 = rows[0][col(&format!("value_{i}"))].parse().unwrap();
        assert_eq!(v, with.values[i]);
    }
    assert_eq!(rows[0][col("error")].parse::<f64>().unwrap(), with.error.unwrap());
}

#[test]
fn convergence_study_round_trips() {
    let spec = builtin("qlsv1").unwrap();
    let study = convergence_study(&spec, Method::RbfFd, &[40, 20, 30], &SolverOptions::default()).unwrap();
    let ns: Vec<usize> = study.rows.iter().map(|r| r.ns).collect();
    assert_eq!(ns, [20, 30, 40]);
    assert!(study.rows.windows(2).all(|w| w[1].error < w[0].error));
    assert!(study.order.unwrap() > 1.5);

    let mut buf = Vec::new();
    study.write_csv(&mut buf).unwrap();
    let (header, rows) = parse_csv(&buf);
    assert_eq!(header, ["ns", "nodes", "error", "assembly_s", "solve_s"]);
    for (row, r) in rows.iter().zip(&study.rows) {
        assert_eq!(row[0].parse::<usize>().unwrap(), r.ns);
        assert_eq!(row[1].parse::<usize>().unwrap(), r.nodes);
        assert_eq!(row[2].parse::<f64>().unwrap(), r.error);
        assert_eq!(row[3].parse::<f64>().unwrap(), r.assembly_seconds);
    }
}

#[test]
fn convergence_study_needs_reference() {
    let spec = builtin("qlsv2").unwrap();
    let err = convergence_study(&spec, Method::RbfFd, &[20], &SolverOptions::default()).unwrap_err();
    assert!(matches!(err, Error::MissingReference(_)));
}

#[test]
fn table_round_trips() {
    let spec = builtin("sabr2").unwrap();
    let table = table_run(&spec, Method::RbfFd, &[24, 16], &SolverOptions::default()).unwrap();
    assert_eq!(table.rows.len(), 2);
    assert_eq!(table.rows[0].0, 16);

    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    let (header, rows) = parse_csv(&buf);
    assert_eq!(header.len(), 4);
    for (row, (ns, vals)) in rows.iter().zip(&table.rows) {
        assert_eq!(row[0].parse::<usize>().unwrap(), *ns);
        let parsed: Vec<f64> = row[1..].iter().map(|c| c.parse().unwrap()).collect();
        assert_eq!(&parsed, vals);
    }
    let text = table.to_text();
    assert_eq!(text.lines().count(), 4);
    assert!(text.contains(&format!("{:.6}", table.rows[1].1[1])));
}

#[test]
fn timing_study_adds_serial_baseline() {
    let spec = builtin("qlsv1").unwrap();
    let study = timing_study(&spec, Method::RbfFd, &[16], &[2], &SolverOptions::default()).unwrap();
    assert_eq!(study.rows.len(), 2);
    assert_eq!(study.rows[0].workers, 1);
    assert_eq!(study.rows[0].speedup, 1.0);
    assert_eq!(study.rows[0].values, study.rows[1].values);

    let mut buf = Vec::new();
    study.write_csv(&mut buf).unwrap();
    let (header, rows) = parse_csv(&buf);
    assert_eq!(header, ["ns", "workers", "assembly_s", "total_s", "error", "speedup"]);
    assert_eq!(rows[1][5].parse::<f64>().unwrap(), study.rows[1].speedup);
}

#[test]
fn config_overrides_problem_and_solver() {
    let mut problem = builtin("qlsv1").unwrap();
    problem.spots = vec![0.9, 1.1];
    problem.reference = None;
    let cfg = RunConfig {
        problem: Some(problem),
        solver: SolverOptions {
            nt: Some(12),
            ..SolverOptions::default()
        },
    };
    let text = cfg.to_toml_string().unwrap();
    let back = RunConfig::from_toml_str(&text).unwrap();
    let req = RunRequest::new(back.problem.unwrap(), Method::RbfFd, 16).with_options(back.solver);
    let rep = price(&req).unwrap();
    assert_eq!(rep.values.len(), 2);
    assert_eq!(rep.nt, 12);
}

#[test]
fn invalid_requests_are_refused() {
    assert!(matches!(
        price(&RunRequest::builtin("qlsv1", Method::RbfFd, 7).unwrap()),
        Err(Error::InvalidResolution(_))
    ));
    assert!(matches!(RunRequest::builtin("black-scholes", Method::RbfFd, 20), Err(Error::UnknownProblem(_))));
}
