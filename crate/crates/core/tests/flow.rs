mod common;

use common::*;
use invisible::verify::{mirror_residual, ray_starts, shoot, trace_settings, Direction};
use invisible::{integrate, Error, GeodesicState};

#[test]
fn traces_are_time_reversible() {
    let c = default_construction(2);
    let hf = &c.field;
    let settings = trace_settings(hf, 1e-12, 1e-12, 1e3);
    let mut wide = settings.clone();
    wide.bounding_radius *= 1.5;
    let p = "custom:0.92,0.39".parse::<Direction>().unwrap().momentum(hf.roots()).unwrap();
    for x0 in ray_starts(hf, &p, 7) {
        let fwd = integrate(hf, &GeodesicState::new(x0.clone(), p.clone()), &settings).unwrap();
        let end = fwd.last();
        let back = integrate(hf, &GeodesicState::new(end.x.clone(), -end.p.clone()), &wide).unwrap();
        // the return trip ends on the bounding sphere; compare on the entry line
        let back_line = &back.exit_line;
        assert!(back_line.distance_to(&x0) < 1e-8, "{}", back_line.distance_to(&x0));
        assert!((&back_line.direction + &fwd.entry_line.direction).norm() < 1e-8);
    }
}

#[test]
fn root_traces_are_mirror_symmetric() {
    for n in [2, 3] {
        let c = default_construction(n);
        let hf = &c.field;
        let settings = trace_settings(hf, 1e-12, 1e-12, 1e3);
        let mut checked = 0;
        for k in 0..hf.roots().len() {
            let p = hf.roots().root(k).clone();
            let starts = ray_starts(hf, &p, 36);
            for trace in shoot(hf, &p, &starts, &settings).unwrap() {
                if trace.balls_crossed().len() == 2 {
                    let r = mirror_residual(hf.roots(), &trace, k).unwrap();
                    assert!(r < 1e-7, "n={n} root {k}: residual {r}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 0);
    }
}

#[test]
fn energy_is_conserved_along_traces() {
    let c = default_construction(3);
    let hf = &c.field;
    let settings = trace_settings(hf, 1e-12, 1e-12, 1e3);
    for d in ["root:2", "root:-5", "custom:0.3,-1,0.2"] {
        let p = d.parse::<Direction>().unwrap().momentum(hf.roots()).unwrap();
        for trace in shoot(hf, &p, &ray_starts(hf, &p, 16), &settings).unwrap() {
            assert!(trace.energy_drift <= c.resolved.thresholds.energy_drift);
            for s in trace.polyline.iter().step_by(5) {
                assert!((hf.energy(&s.x, &s.p).unwrap() - 1.0).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn integration_limits_are_reported() {
    let c = default_construction(2);
    let hf = &c.field;
    let p = hf.roots().root(0).clone();
    let x0 = ray_starts(hf, &p, 1)[0].clone();
    let mut settings = trace_settings(hf, 1e-12, 1e-12, 1e3);
    settings.max_param = 0.1;
    assert!(matches!(integrate(hf, &GeodesicState::new(x0.clone(), p.clone()), &settings), Err(Error::EscapeFailure { .. })));
    let settings = trace_settings(hf, 1e-12, 1e-12, 1e3);
    let inside = hf.group().chamber_point().clone();
    assert!(integrate(hf, &GeodesicState::new(inside, p), &settings).is_err());
}
