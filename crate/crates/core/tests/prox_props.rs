use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spdhg::{ComplexImage, Functional, Shape};

fn families(seed: u64) -> Vec<Functional> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = ComplexImage::random(Shape::vector(4), 1.0, &mut rng);
    vec![
        Functional::squared_distance(b),
        Functional::squared_norm(0.7).unwrap(),
        Functional::group_l1(1.3, 2).unwrap(),
        Functional::group_l1(0.5, 4).unwrap(),
        Functional::Zero,
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// v = prox_{σf*}(v) + σ prox_{f/σ}(v/σ) wherever both sides exist.
    #[test]
    fn moreau_decomposition(seed in any::<u64>(), log_sigma in -2.0f64..2.0) {
        let sigma = 10f64.powf(log_sigma);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let v = ComplexImage::random(Shape::vector(4), 2.0, &mut rng);
        for f in families(seed) {
            let Ok(primal) = f.prox_primal(1.0 / sigma, &v.scaled(1.0 / sigma)) else { continue };
            let dual = f.prox_dual(sigma, &v).unwrap();
            let recon = dual.add(&primal.scaled(sigma));
            prop_assert!(recon.sub(&v).max_abs() <= 1e-10 * (1.0 + v.max_abs()), "{}", f.family());
        }
    }

    /// Proximal maps are firmly nonexpansive, hence nonexpansive.
    #[test]
    fn prox_is_nonexpansive(seed in any::<u64>(), log_step in -2.0f64..2.0) {
        let step = 10f64.powf(log_step);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let u = ComplexImage::random(Shape::vector(4), 2.0, &mut rng);
        let v = ComplexImage::random(Shape::vector(4), 2.0, &mut rng);
        for f in families(seed) {
            let du = f.prox_dual(step, &u).unwrap();
            let dv = f.prox_dual(step, &v).unwrap();
            prop_assert!(du.sub(&dv).norm() <= u.sub(&v).norm() * (1.0 + 1e-12));
            if let (Ok(pu), Ok(pv)) = (f.prox_primal(step, &u), f.prox_primal(step, &v)) {
                prop_assert!(pu.sub(&pv).norm() <= u.sub(&v).norm() * (1.0 + 1e-12));
            }
        }
    }

    /// The dual prox of group_l1 lands in the α-ball of every group.
    #[test]
    fn group_projection_feasible(seed in any::<u64>(), scale in 0.01f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = ComplexImage::random(Shape::vector(6), scale, &mut rng);
        let f = Functional::group_l1(0.8, 4).unwrap();
        let p = f.prox_dual(0.3, &v).unwrap();
        prop_assert_eq!(f.conjugate_value(&p).unwrap(), 0.0);
        for g in p.to_interleaved().chunks(4) {
            prop_assert!(g.iter().map(|x| x * x).sum::<f64>().sqrt() <= 0.8 * (1.0 + 1e-12));
        }
    }

    /// Fenchel–Young: f(u) + f*(z) ≥ ⟨u, z⟩.
    #[test]
    fn fenchel_young(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
        let u = ComplexImage::random(Shape::vector(4), 1.0, &mut rng);
        let z = ComplexImage::random(Shape::vector(4), 0.3, &mut rng);
        for f in families(seed) {
            let lhs = f.value(&u).unwrap() + f.conjugate_value(&z).unwrap();
            prop_assert!(lhs >= u.dot(&z) - 1e-12);
        }
    }
}
