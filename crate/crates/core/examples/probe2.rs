use hqe_core::ratfun::{LocusRat, QuadField, XPoly};
use hqe_core::scalar::*;
use hqe_core::series::{SeriesVar, TruncSeries};

type P = RatScalar;

fn main() {
    // 1) compose: h(lambda) = lambda^{-1} composed with g(x) = x + a + b/x
    let a = P::from_int(3);
    let b = P::from_int(5);
    let g = TruncSeries::from_terms(
        SeriesVar::X,
        vec![(1, P::one()), (0, a.clone()), (-1, b.clone())],
    )
    .truncated_below(-8);
    let h = TruncSeries::<P>::monomial(SeriesVar::Lambda, -1, P::one()).truncated_below(-5);
    match h.compose(&g) {
        Ok(r) => println!("compose result: {}", r),
        Err(e) => println!("compose error: {:?}", e),
    }
    // hand check: 1/(x+3+5/x) = x^{-1} (1 + (3/x + 5/x^2))^{-1}
    let gi = g.recip().unwrap();
    println!("recip directly:  {}", gi);

    // 2) eval_series of 1/(x^2- nu x - s) at g, vs direct series division
    let e = ParamEnv::<P>::at(&Assignment::random(77, 1));
    let q = QuadField::new(e.nu.clone(), e.s.clone());
    let f = LocusRat::new(XPoly::one(), 0, 1, &q);
    let direct = f.eval_series(&g, &q).unwrap();
    let dpoly_at_g = g
        .mul(&g)
        .unwrap()
        .sub(&g.scale(&e.nu))
        .unwrap()
        .sub(&TruncSeries::constant(SeriesVar::X, e.s.clone()))
        .unwrap();
    let by_hand = dpoly_at_g.recip().unwrap();
    println!(
        "eval_series == hand: {:?}",
        direct.eq_on_common_window(&by_hand)
    );

    // 3) a negative-mode LocusRat with polynomial part: x^3/(D) at g
    let f2 = LocusRat::new(XPoly::x().pow(3), 0, 1, &q);
    let d2 = f2.eval_series(&g, &q).unwrap();
    let by_hand2 = g.pow(3).unwrap().mul(&by_hand).unwrap();
    println!(
        "poly-part eval == hand: {:?}  (windows {:?},{:?} vs {:?},{:?})",
        d2.eq_on_common_window(&by_hand2),
        d2.lo,
        d2.hi,
        by_hand2.lo,
        by_hand2.hi
    );
    println!("d2      = {}", d2);
    println!("byhand2 = {}", by_hand2);

    // 4) trace the W composition
    use hqe_core::fock::Sector;
    use hqe_core::smatrix::*;
    use hqe_core::vertex::descendant_mode_family;
    let e3 = ParamEnv::<P>::at(&Assignment::random(77, 3));
    let s3 = eval_smatrix(
        &s_matrix(3, 6, &ParamEnv::symbolic()).unwrap(),
        &Assignment::random(77, 3),
    )
    .unwrap();
    let kernel = w_kernel(&s3);
    let desc = descendant_mode_family(Sector::Zero, 6, &e3).unwrap();
    let mirror = mirror_coordinate(Sector::Zero, 10, &e3).unwrap();
    for n in 0..=6i64 {
        let m = desc.mode(n);
        println!(
            "desc mode {}: num deg {:?}, xpow {}, dpow {}",
            n,
            m.c0.num.degree(),
            m.c0.xpow,
            m.c0.dpow
        );
        let e0 = m.c0.expand_at_infinity(hqe_core::series::SeriesVar::Lambda, -4, &desc.ctx).unwrap();
        println!("   expansion: {}", e0);
    }
    let w_lambda = w_phase_series(&kernel, &desc, -4, &e3).unwrap();
    println!("w_lambda = {}", w_lambda);
    println!("lambda_of_x window: {:?} {:?}", mirror.lambda_of_x.lo, mirror.lambda_of_x.hi);
    let w_x = w_lambda.compose(&mirror.lambda_of_x).unwrap();
    println!("w_x = {}", w_x);
}
// appended: trace the phase composition
