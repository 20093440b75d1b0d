use orbilab_web::{Lab, Profile};

#[test]
fn profile_samples_start_at_the_peak() {
    let g = Profile::new(1, 3.0, 11, 5.0).unwrap();
    assert_eq!(g.radii().len(), 11);
    assert!((g.values()[0] - 1.5).abs() < 1e-8);
    assert!(g.values().windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn cone_bump_descends_near_the_cone_level() {
    let mut lab = Lab::new("pillowcase2d", 32, 0.1, 4.0).unwrap();
    assert!((lab.energy() - 0.25 / (0.1f64 * 0.1) * 0.5).abs() < 1e-9);
    lab.inject(0.5, 0.5).unwrap();
    let injected = lab.energy();
    lab.descend().unwrap();
    assert!(lab.converged());
    assert!(lab.energy() <= injected);
    assert!((lab.energy() - lab.cone_level()).abs() / lab.cone_level() < 0.2);

    let field = lab.field();
    assert_eq!(field.len(), 32 * 32);
    let peak = field.iter().cloned().fold(f64::MIN, f64::max);
    assert_eq!(field[16 * 32 + 16], peak);

    let cf = lab.concentration().unwrap();
    let [cc, x, y] = lab.photograph(0.6).unwrap()[..] else {
        panic!()
    };
    assert!((cf.iter().cloned().fold(0.0, f64::max) - cc).abs() < 1e-12);
    assert!((x - 0.5).abs() < 0.1 && (y - 0.5).abs() < 0.1);
}
