use hlab_core::bunching::exact_splitting_linear;
use hlab_core::estimation::{fit_holder, sample_pairs};
use hlab_core::foliations::{holonomy_map, triangle_constant, Disc, LeafSide, LinearFoliation, StrongFoliation};
use hlab_core::phasespace::{wrap, TorusPoint, Transversal, V3};
use hlab_core::systems::CAT;
use hlab_core::SystemSpec;

const GOLDEN_SHIFT: f64 = 0.309_016_994_374_947_4;

fn vertical(x: f64, y: f64) -> Transversal {
    Transversal::new(wrap(&[x, y]).unwrap(), &[0.0, 1.0], 0.2).unwrap()
}

fn source() -> Transversal {
    Transversal::new(TorusPoint::origin(2).unwrap(), &[0.0, 1.0], 0.1).unwrap()
}

fn unstable_path() -> Vec<TorusPoint> {
    let slope = (5f64.sqrt() - 1.0) / 2.0;
    [0.0, 0.25, 0.5].iter().map(|&x| wrap(&[x, slope * x]).unwrap()).collect()
}

/// Height at which the unstable leaf of `g` through `(0, s)` first reaches the
/// line `x₁ = 1/2`: a short segment of the linear unstable direction at
/// `g⁻¹²(x)` is pushed forward twelve times and the resulting polyline cut.
fn long_leaf_height(g: &SystemSpec, s: f64) -> f64 {
    const DEPTH: usize = 12;
    const NODES: usize = 40_000;
    let x = wrap(&[0.0, s]).unwrap();
    let mut y = x;
    for _ in 0..DEPTH {
        y = g.apply_inverse(&y).unwrap();
    }
    let e_u = exact_splitting_linear(CAT).unwrap().e_u;
    let e_u = V3::new(e_u[0], e_u[1], 0.0) * e_u[0].signum();
    let push = |v: V3| (0..DEPTH).fold(v, |w, _| g.lift_apply(&w));
    let origin = push(y.lift());
    let shift = V3::new(origin[0].round(), (origin[1] - s).round(), 0.0);
    let reach = 1.2 / 2.618_033_988_749_895f64.powi(DEPTH as i32);
    let mut prev = origin - shift;
    for i in 1..=NODES {
        let cur = push(y.lift() + e_u * (reach * i as f64 / NODES as f64)) - shift;
        if cur[0] >= 0.5 {
            let w = (0.5 - prev[0]) / (cur[0] - prev[0]);
            return prev[1] + w * (cur[1] - prev[1]);
        }
        prev = cur;
    }
    panic!("leaf polyline never reached x = 1/2");
}

#[test]
fn linear_holonomy_is_a_translation() {
    let model = StrongFoliation::new(SystemSpec::cat(), LeafSide::U, 0.1).unwrap();
    let (ta, tb) = (vertical(0.0, 0.0), vertical(0.5, GOLDEN_SHIFT));
    let path = unstable_path();
    for k in 0..=20 {
        let s = -0.1 + 0.01 * k as f64;
        let out = holonomy_map(&model, &ta, &tb, &path, &wrap(&[0.0, s]).unwrap()).unwrap();
        let expected = (s + GOLDEN_SHIFT).rem_euclid(1.0);
        assert!((out.get(1) - expected).abs() < 1e-10, "s={s}: {}", out.get(1));
        assert!((out.get(0) - 0.5).abs() < 1e-12);
    }
}

#[test]
fn perturbed_holonomy_matches_long_leaf() {
    let g = SystemSpec::perturbed_cat(0.01).unwrap();
    let model = StrongFoliation::new(g, LeafSide::U, 0.1).unwrap();
    let (ta, tb) = (vertical(0.0, 0.0), vertical(0.5, GOLDEN_SHIFT));
    let path = unstable_path();
    for s in [-0.08, -0.02, 0.0, 0.035, 0.09] {
        let out = holonomy_map(&model, &ta, &tb, &path, &wrap(&[0.0, s]).unwrap()).unwrap();
        let oracle = long_leaf_height(&g, s);
        let diff = out.get(1) - oracle.rem_euclid(1.0);
        assert!((diff - diff.round()).abs() < 1e-8, "s={s}: model {} oracle {oracle}", out.get(1));
    }
}

#[test]
fn perturbed_holonomy_is_nearly_lipschitz() {
    let g = SystemSpec::perturbed_cat(0.01).unwrap();
    let model = StrongFoliation::new(g, LeafSide::U, 0.1).unwrap();
    let (ta, tb) = (source(), vertical(0.5, GOLDEN_SHIFT));
    let path = unstable_path();
    let samples = sample_pairs(|x| holonomy_map(&model, &ta, &tb, &path, x), &ta, 60, 1e-6, 1e-2, 11).unwrap();
    let fit = fit_holder(&samples).unwrap();
    assert!(fit.envelope_theta > 0.95, "{fit:?}");
}

#[test]
fn holonomy_rejects_points_off_the_source() {
    let model = StrongFoliation::new(SystemSpec::cat(), LeafSide::U, 0.1).unwrap();
    let (ta, tb) = (vertical(0.0, 0.0), vertical(0.5, GOLDEN_SHIFT));
    assert!(holonomy_map(&model, &ta, &tb, &unstable_path(), &wrap(&[0.0, 0.3]).unwrap()).is_err());
}

/// `max{|a|, |b|}/|p − q|` and `|p − q|/(|a| + |b|)` for `q − p = a·u − b·v`,
/// by Cramer's rule.
fn brute_force_constant(u: [f64; 2], v: [f64; 2], gaps: impl Iterator<Item = [f64; 2]>) -> f64 {
    let det = -u[0] * v[1] + u[1] * v[0];
    let mut d: f64 = 1.0;
    for g in gaps {
        let a = (-g[0] * v[1] + g[1] * v[0]) / det;
        let b = (u[0] * g[1] - u[1] * g[0]) / det;
        let n = g[0].hypot(g[1]);
        d = d.max(a.abs().max(b.abs()) / n).max(n / (a.abs() + b.abs()));
    }
    d
}

#[test]
fn triangle_constant_at_forty_five_degrees() {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let f = LinearFoliation::new(&[1.0, 0.0], 0.2).unwrap();
    let g = LinearFoliation::new(&[r, r], 0.2).unwrap();
    let disc = Disc { center: wrap(&[0.5, 0.5]).unwrap(), radius: 0.05 };
    let d = triangle_constant(&f, &g, &disc, 4000, 5).unwrap();
    let gaps = (0..3600).map(|k| {
        let a = std::f64::consts::TAU * k as f64 / 3600.0;
        [a.cos(), a.sin()]
    });
    let brute = brute_force_constant([1.0, 0.0], [r, r], gaps);
    assert!((brute - 2f64.sqrt()).abs() < 1e-6, "{brute}");
    assert!(d <= 2f64.sqrt() + 1e-9, "{d}");
    assert!(d > 2f64.sqrt() - 0.02, "{d}");
}

#[test]
fn triangle_constant_of_cat_foliations() {
    let l = exact_splitting_linear(CAT).unwrap();
    let f = StrongFoliation::new(SystemSpec::cat(), LeafSide::U, 0.1).unwrap();
    let g = StrongFoliation::new(SystemSpec::cat(), LeafSide::S, 0.1).unwrap();
    let disc = Disc { center: wrap(&[0.3, 0.3]).unwrap(), radius: 0.02 };
    let d = triangle_constant(&f, &g, &disc, 200, 3).unwrap();
    // Orthogonal eigenlines: the Euclidean triangle inequality is the only slack.
    assert!(l.e_u.dot(&l.e_s).abs() < 1e-15);
    assert!(d >= 1.0 && d <= 2f64.sqrt() + 1e-9, "{d}");
}
