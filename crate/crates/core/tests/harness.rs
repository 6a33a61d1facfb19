use aircomp::asymptotics::prop1_limit;
use aircomp::harness::{
    figure_sweep, mean_and_std_error, read_csv, run_sweep, summarize, write_csv, write_plot_data, Scheme, SweepError,
    SweepResult, SweepSpec, SweptVariable,
};
use aircomp::model::generate_channel_instance;
use aircomp::rng::{derive_seed, seeded};
use aircomp::{Error, SystemConfig64};

fn csv_bytes(result: &SweepResult) -> Vec<u8> {
    let mut out = Vec::new();
    write_csv(&summarize(result), &mut out).unwrap();
    out
}

fn small_spec() -> SweepSpec {
    let base = SystemConfig64::uniform(6, 3, 10.0, 0.1, 1.0, 1.0);
    let mut spec = SweepSpec::new(SweptVariable::PowerDb, vec![-5.0, 5.0, 15.0], base);
    spec.trials = 12;
    spec.master_seed = 4242;
    spec
}

#[test]
fn identical_specs_give_identical_csv() {
    let spec = small_spec();
    assert_eq!(
        csv_bytes(&run_sweep(&spec).unwrap()),
        csv_bytes(&run_sweep(&spec).unwrap())
    );
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let spec = small_spec();
    let run_on = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_sweep(&spec).unwrap())
    };
    let one = run_on(1);
    let four = run_on(4);
    assert_eq!(one.samples, four.samples);
    assert_eq!(one.points, four.points);
}

#[test]
fn csv_layout_and_round_trip() {
    let result = run_sweep(&small_spec()).unwrap();
    let bytes = csv_bytes(&result);
    let text = String::from_utf8(bytes.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("variable,grid_value,scheme,mean_mse,std_error,trials")
    );
    let order: Vec<&str> = lines.take(4).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(order, ["channel_inversion", "full_power", "ignore_csi", "proposed"]);
    assert_eq!(read_csv(bytes.as_slice()).unwrap(), summarize(&result));
}

#[test]
fn plot_data_has_one_block_per_scheme() {
    let result = run_sweep(&small_spec()).unwrap();
    let mut out = Vec::new();
    write_plot_data(&result, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let blocks: Vec<&str> = text.split("\n\n\n").collect();
    assert_eq!(blocks.len(), 4);
    for (block, scheme) in blocks.iter().zip(Scheme::ALL) {
        assert!(block.starts_with(&format!("# {scheme}\n")));
        let data: Vec<&str> = block.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data.len(), 3);
        assert_eq!(data[0].split_whitespace().count(), 3);
    }
}

#[test]
fn antenna_sweep_row_count() {
    let mut spec = figure_sweep(5, 1).unwrap();
    spec.trials = 2;
    let rows = summarize(&run_sweep(&spec).unwrap());
    assert_eq!(rows.len(), 7 * 4);
}

#[test]
fn proposed_never_loses_to_ignoring_errors_on_the_same_draw() {
    let base = SystemConfig64::uniform(8, 4, 10.0, 0.1, 1.0, 1.0);
    let mut spec = SweepSpec::new(SweptVariable::EstErrorVar, vec![0.0, 0.1, 0.3, 0.5], base);
    spec.trials = 25;
    spec.schemes = vec![Scheme::Proposed, Scheme::IgnoreCsi];
    let result = run_sweep(&spec).unwrap();
    for g in 0..spec.grid.len() {
        let prop = result.samples(g, Scheme::Proposed).unwrap();
        let ign = result.samples(g, Scheme::IgnoreCsi).unwrap();
        for (t, (p, i)) in prop.iter().zip(ign).enumerate() {
            assert!(p <= &(i + 1e-12), "grid {g}, trial {t}: {p} > {i}");
        }
    }
}

#[test]
fn error_variance_sweep_orders_proposed_below_ignore_csi() {
    let mut spec = figure_sweep(3, 11).unwrap();
    spec.trials = 50;
    spec.schemes = vec![Scheme::Proposed, Scheme::IgnoreCsi];
    let result = run_sweep(&spec).unwrap();
    let prop = result.curve(Scheme::Proposed).unwrap();
    let ign = result.curve(Scheme::IgnoreCsi).unwrap();
    assert_eq!(prop[0], ign[0], "identical problems without estimation error");
    assert!(prop.iter().zip(&ign).all(|(p, i)| p <= i));
}

/// Single-antenna power sweep at desk scale: the proposed curve decreases
/// (within sampling noise, since each grid point draws its own channels),
/// settles near the average high-power floor, and ignoring estimation errors
/// costs more than 50% at 30 dB.
#[test]
fn single_antenna_power_sweep_shape() {
    let mut spec = figure_sweep(1, 5).unwrap();
    spec.trials = 200;
    spec.schemes = vec![Scheme::Proposed, Scheme::IgnoreCsi];
    let result = run_sweep(&spec).unwrap();
    let prop = result.curve(Scheme::Proposed).unwrap();
    for g in 1..prop.len() {
        let se = result.point(g, Scheme::Proposed).unwrap().std_error
            + result.point(g - 1, Scheme::Proposed).unwrap().std_error;
        assert!(prop[g] <= prop[g - 1] + se, "rise at grid point {g}");
    }

    let last = spec.grid.len() - 1;
    let config = SweptVariable::PowerDb
        .apply(&spec.base_config, spec.grid[last])
        .unwrap();
    let floors: Vec<f64> = (0..spec.trials)
        .map(|t| {
            let seed = derive_seed(spec.master_seed, &[last as u64, t as u64]);
            let inst = generate_channel_instance(&config, &mut seeded(seed)).unwrap();
            prop1_limit(&inst.est_channel, &config).unwrap()
        })
        .collect();
    let (floor, _) = mean_and_std_error(&floors);
    assert!(
        (prop[last] - floor).abs() <= 0.05 * floor,
        "{} vs floor {floor}",
        prop[last]
    );

    let ign = result.point(last, Scheme::IgnoreCsi).unwrap().mean_mse;
    assert!(ign > 1.5 * prop[last]);
}

#[test]
fn invalid_specs_are_rejected_before_running() {
    let mut spec = small_spec();
    spec.grid = vec![1.0, 1.0];
    let err = run_sweep(&spec).unwrap_err();
    assert!(matches!(err.source, Error::InvalidArgument(_)));

    let err = SweepError {
        grid_index: 2,
        grid_value: 10.0,
        trial: 7,
        scheme: Some(Scheme::FullPower),
        source: Error::DegenerateChannel { wd: 3 },
    };
    assert_eq!(
        err.to_string(),
        "grid point 2 (10), trial 7, scheme full_power: estimated channel of device 3 is zero"
    );
}
