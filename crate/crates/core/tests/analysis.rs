use maser_bloch_core::analysis::{first_revival_delay, hole_profile};
use maser_bloch_core::protocol::{parse_override_value, preset, run, Preset, Scenario};

fn scenario(name: &str) -> Scenario {
    match preset(name).unwrap() {
        Preset::Scenario(s) => s,
        Preset::Sweep(_) => unreachable!(),
    }
}

#[test]
fn burst_burns_a_hole_about_twice_the_inversion_deep() {
    let mut s = scenario("sr_decay");
    s.record.sigma_z_stride = Some(5);
    let sim = run(&s).unwrap();
    let (_, grid) = s.params.build().unwrap();
    // The hole deepens while the burst empties the centre packets and then
    // refills; take its deepest state.
    let amp = sim.series.abs();
    let ipk = (0..amp.len())
        .max_by(|&i, &j| amp[i].total_cmp(&amp[j]))
        .unwrap();
    let t_pk = sim.series.t[ipk];
    let snaps = sim.series.sigma_z.unwrap();
    let hole = snaps
        .times
        .iter()
        .zip(&snaps.values)
        .filter(|(t, _)| **t >= t_pk && **t <= t_pk + 3e-6)
        .map(|(_, z)| hole_profile(z, &grid).unwrap())
        .max_by(|a, b| a.depth.total_cmp(&b.depth))
        .unwrap();
    let expected = 2.0 * s.initial.p0;
    assert!(
        (hole.depth / expected - 1.0).abs() < 0.3,
        "depth {} vs {expected}",
        hole.depth
    );
    assert!(hole.width > 0.0 && hole.width < grid.fwhm);
}

fn delay(s: &Scenario) -> f64 {
    first_revival_delay(&run(s).unwrap().series).unwrap()
}

#[test]
fn revival_delay_tracks_refill_rate_and_cavity_loss() {
    let mut base = scenario("revivals_long");
    base.t_end = 80e-6;
    let reference = delay(&base);

    let j = base.params.j_fill_hz;
    let faster = base
        .with_override(
            "params.j_fill_hz",
            parse_override_value(&(2.0 * j).to_string()),
        )
        .unwrap();
    assert!(delay(&faster) < reference);

    let k = base.params.kappa_hz;
    let lossier = base
        .with_override(
            "params.kappa_hz",
            parse_override_value(&(1.4 * k).to_string()),
        )
        .unwrap();
    assert!(delay(&lossier) > reference);
}
