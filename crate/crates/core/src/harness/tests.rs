use super::*;

fn small(kind: ExperimentKind, ks: Vec<usize>) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(kind, vec![40, 60], vec![400], ks);
    s.trials = 4;
    s.seed = 9;
    s
}

#[test]
fn k_one_always_succeeds() {
    let r = run_recovery_curve(&small(ExperimentKind::RecoveryCurve, vec![1])).unwrap();
    assert!(r.cells.iter().all(|c| c.success_rate == 1.0));
    let r = run_baseline_table(&small(ExperimentKind::BaselineTable, vec![1])).unwrap();
    assert_eq!(r.cells.len(), 2 * 3);
    assert!(r.cells.iter().all(|c| c.success_rate == 1.0), "{:?}", r.cells);
}

#[test]
fn rows_are_full_factorial() {
    let spec = small(ExperimentKind::RecoveryCurve, vec![1, 3, 5]);
    let r = run_experiment(&spec).unwrap();
    assert_eq!(r.cells.len(), 2 * 1 * 3);
    let csv = to_csv(&r).unwrap();
    assert_eq!(csv.lines().count(), 1 + 6);
    assert!(csv.lines().next().unwrap().starts_with("method,series,n,N,k,sigma"));
    assert!(r.cells.iter().all(|c| (0.0..=1.0).contains(&c.success_rate)));
    assert_eq!(r.summaries.len(), 2);

    let mut noise = small(ExperimentKind::NoiseSweep, vec![2, 4]);
    noise.sigmas = vec![0.0, 0.1, 0.2];
    let r = run_noise_sweep(&noise).unwrap();
    assert_eq!(r.cells.len(), 2 * 2 * 3);
    let r = run_clustered_curve(&small(ExperimentKind::ClusteredCurve, vec![2, 4])).unwrap();
    assert_eq!(r.cells.len(), 2 * 2 * 2);
}

#[test]
fn rerun_from_json_reproduces_csv() {
    let mut spec = small(ExperimentKind::RecoveryCurve, vec![2, 6, 12]);
    spec.weights = WeightScheme::Equal;
    let first = run_experiment(&spec).unwrap();
    let json = first.to_json().unwrap();
    let back = ExperimentReport::from_json(&json).unwrap();
    assert_eq!(back.spec, spec);
    let again = run_experiment(&back.spec).unwrap();
    assert_eq!(to_csv(&first).unwrap(), to_csv(&again).unwrap());
    assert_eq!(summary_csv(&first).unwrap(), summary_csv(&again).unwrap());
}

#[test]
fn svg_is_well_formed() {
    let mut spec = small(ExperimentKind::NoiseSweep, vec![1, 2, 3]);
    spec.sigmas = vec![0.0, 0.3];
    let r = run_experiment(&spec).unwrap();
    let svg = render_svg(&r);
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let lines = doc.descendants().filter(|n| n.has_tag_name("polyline")).count();
    assert_eq!(lines, 4);
    assert!(svg.contains("set size k") && svg.contains("success rate"));
}

#[test]
fn zero_noise_matches_recovery_curve() {
    let base = small(ExperimentKind::RecoveryCurve, vec![3, 8, 14]);
    let mut noise = base.clone();
    noise.kind = ExperimentKind::NoiseSweep;
    noise.sigmas = vec![0.0];
    noise.success = Some(SuccessCriterion::ExactWeights { tol: 1e-6 });
    let a = run_experiment(&base).unwrap();
    let b = run_experiment(&noise).unwrap();
    for (x, y) in a.cells.iter().zip(&b.cells) {
        assert_eq!((x.successes, x.mean_weight_error), (y.successes, y.mean_weight_error));
    }
}

#[test]
fn whole_dictionary_cluster_is_everything_but_the_seed() {
    let d = Dictionary::generate_synthetic(20, 21, 3).unwrap();
    let mut pool = cluster_pool(&d, 7, 10).unwrap();
    pool.sort_unstable();
    let expected: Vec<usize> = (0..21).filter(|&j| j != 7).collect();
    assert_eq!(pool, expected);
    assert!(matches!(cluster_pool(&d, 7, 11), Err(HarnessError::ClusterTooLarge { .. })));
}

#[test]
fn clustered_members_are_neighbours_of_one_seed() {
    let d = Dictionary::generate_synthetic(30, 300, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = draw_trial(&d, 6, Series::Clustered, WeightScheme::Equal, 0.0, &mut rng).unwrap();
    assert_eq!(t.indices.len(), 6);
    assert!(t.indices.windows(2).all(|w| w[0] < w[1]));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let seed_entry = rng.random_range(0..d.len());
    let pool = cluster_pool(&d, seed_entry, 6).unwrap();
    assert!(t.indices.iter().all(|j| pool.contains(j)));
}

#[test]
fn noise_has_requested_relative_size() {
    let d = Dictionary::generate_synthetic(400, 100, 5).unwrap();
    let mut clean_rng = ChaCha8Rng::seed_from_u64(4);
    let mut noisy_rng = clean_rng.clone();
    let clean = draw_trial(&d, 5, Series::Random, WeightScheme::Uniform, 0.0, &mut clean_rng).unwrap();
    let noisy = draw_trial(&d, 5, Series::Random, WeightScheme::Uniform, 0.2, &mut noisy_rng).unwrap();
    assert_eq!(clean.indices, noisy.indices);
    let diff: Vec<f64> = clean.target.iter().zip(&noisy.target).map(|(a, b)| a - b).collect();
    let rel = linalg::norm(&diff) / linalg::norm(&clean.target);
    assert!((rel - 0.2).abs() < 0.03, "{rel}");
}

#[test]
fn trial_seeds_differ_across_cells() {
    let mut seen = std::collections::HashSet::new();
    for n in [100, 300] {
        for k in 1..20 {
            for t in 0..20 {
                assert!(seen.insert(trial_seed(1, n, 10_000, k, t)));
            }
        }
    }
    assert_ne!(trial_seed(1, 100, 10_000, 3, 0), trial_seed(2, 100, 10_000, 3, 0));
}

#[test]
fn spec_json_defaults_and_validation() {
    let spec = ExperimentSpec::from_json(
        r#"{"kind": "recovery_curve", "dictionary": {"kind": "synthetic_gaussian", "seed": 3},
            "dims": [100], "sizes": [1000], "ks": {"from": 1, "to": 9, "step": 2}}"#,
    )
    .unwrap();
    assert_eq!(spec.trials, 20);
    assert_eq!(spec.ks.values(), vec![1, 3, 5, 7, 9]);
    assert_eq!(spec.success_criterion(), SuccessCriterion::ExactWeights { tol: 1e-6 });
    assert_eq!(spec.method_list(), vec![Method::Screened]);
    assert_eq!(spec.fixed_lambda, 0.02);

    let reject = |edit: &dyn Fn(&mut ExperimentSpec)| {
        let mut s = spec.clone();
        edit(&mut s);
        s.validate().unwrap_err()
    };
    assert!(matches!(reject(&|s| s.trials = 0), HarnessError::InvalidSpec(_)));
    assert!(matches!(reject(&|s| s.ks = KRange::List(vec![])), HarnessError::InvalidSpec(_)));
    assert!(matches!(reject(&|s| s.sigmas = vec![0.1]), HarnessError::InvalidSpec(_)));
    assert!(matches!(reject(&|s| s.ks = KRange::List(vec![2000])), HarnessError::InvalidSpec(_)));
    assert!(matches!(
        reject(&|s| {
            s.kind = ExperimentKind::ClusteredCurve;
            s.ks = KRange::List(vec![600]);
        }),
        HarnessError::ClusterTooLarge { .. }
    ));
    assert!(ExperimentSpec::from_json(r#"{"kind": "recovery_curve", "bogus": 1}"#).is_err());
    assert!(matches!(
        run_noise_sweep(&spec),
        Err(HarnessError::WrongKind { .. })
    ));
}

#[test]
fn file_dictionary_must_offer_listed_dims() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.bin");
    Dictionary::generate_synthetic(16, 50, 1).unwrap().save_cache(&path).unwrap();
    let mut spec = ExperimentSpec::new(ExperimentKind::RecoveryCurve, vec![16], vec![40], vec![1, 2]);
    spec.dictionary = DictionarySource::File { path: path.clone() };
    spec.trials = 3;
    let r = run_experiment(&spec).unwrap();
    assert!(r.cells.iter().all(|c| c.size == 40 && c.success_rate == 1.0));
    spec.dims = vec![16, 32];
    assert!(matches!(
        run_experiment(&spec),
        Err(HarnessError::DimensionUnavailable { requested: 32, available: 16 })
    ));
    spec.dims = vec![16];
    spec.sizes = vec![60];
    assert!(matches!(run_experiment(&spec), Err(HarnessError::SizeUnavailable { .. })));
}

#[test]
fn emit_writes_all_formats() {
    let r = run_experiment(&small(ExperimentKind::PhaseProbe, vec![1, 2])).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for f in [ReportFormat::Csv, ReportFormat::Svg, ReportFormat::Json] {
        files.extend(emit_report(&r, f, dir.path()).unwrap());
    }
    let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into()).collect();
    assert_eq!(names, ["cells.csv", "summary.csv", "curves.svg", "report.json"]);
    let back = ExperimentReport::from_json(&std::fs::read_to_string(&files[3]).unwrap()).unwrap();
    assert_eq!(back.cells, r.cells);
}
