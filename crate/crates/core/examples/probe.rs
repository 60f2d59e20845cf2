use hqe_core::fock::Sector;
use hqe_core::scalar::*;
use hqe_core::series::{SeriesVar, TruncSeries};
use hqe_core::smatrix::*;
use hqe_core::vertex::{descendant_mode_family, mode_family};

type P = RatScalar;

fn show_diff(name: &str, a: &TruncSeries<TruncSeries<P>>, b: &TruncSeries<TruncSeries<P>>) {
    let lo = match (a.lo, b.lo) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (Some(x), None) | (None, Some(x)) => Some(x),
        _ => None,
    };
    let hi = match (a.hi, b.hi) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (Some(x), None) | (None, Some(x)) => Some(x),
        _ => None,
    };
    println!("{}: A outer {:?},{:?}; B outer {:?},{:?}", name, a.lo, a.hi, b.lo, b.hi);
    let mut keys: Vec<i64> = a.terms().map(|(d, _)| *d).collect();
    for (d, _) in b.terms() {
        if !keys.contains(d) {
            keys.push(*d);
        }
    }
    keys.sort();
    for d in keys {
        if lo.map_or(false, |l| d < l) || hi.map_or(false, |h| d > h) {
            continue;
        }
        let av = a.coeff(d);
        let bv = b.coeff(d);
        match av.eq_on_common_window(&bv) {
            Ok(true) => {}
            Ok(false) => {
                let diff = av.sub(&bv).unwrap();
                println!("  lam^{}: A-B = {}", d, diff);
            }
            Err(e) => println!("  lam^{}: cmp error {:?}", d, e),
        }
    }
}

fn main() {
    let e = ParamEnv::<P>::at(&Assignment::random(77, 1));
    let s_sym = s_matrix(2, 5, &ParamEnv::symbolic()).unwrap();
    let sp = eval_smatrix(&s_sym, &Assignment::random(77, 1)).unwrap();
    let fam = mode_family(Sector::Zero, -4, 4, &e).unwrap();
    let mir = mirror_coordinate(Sector::Zero, 14, &e).unwrap();
    match conjugated_exponent(Sector::Zero, &sp, &fam, &mir, 3, -6, -4, &e) {
        Ok(p) => {
            show_diff("dm c0", &p.direct.c0, &p.mirror.c0);
            show_diff("dm ci", &p.direct.cinf, &p.mirror.cinf);
        }
        Err(err) => println!("pipelines failed: {:?}", err),
    }

    // eigenrelation
    let fam2 = mode_family(Sector::Zero, -3, 3, &e).unwrap();
    let at_lambda = family_biseries(&fam2, -6, None).unwrap();
    println!("eigen: {:?}", eigenrelation_holds(&at_lambda, &e.nu, &e.s));
    // manual: recompute LHS and show diffs with windows
    // (reuse library internals through public API only)
    println!("outer window of modes-at-lambda: {:?} {:?}", at_lambda.c0.lo, at_lambda.c0.hi);
    for (d, v) in at_lambda.c0.terms() {
        println!("  lam^{} inner window {:?} {:?}", d, v.lo, v.hi);
        if *d > -3 {
            break;
        }
    }

    // derivative identity pieces
    let e3 = ParamEnv::<P>::at(&Assignment::random(77, 3));
    let s3 = eval_smatrix(&s_matrix(3, 6, &ParamEnv::symbolic()).unwrap(), &Assignment::random(77, 3)).unwrap();
    let kernel = w_kernel(&s3);
    let desc = descendant_mode_family(Sector::Zero, 6, &e3).unwrap();
    let fam3 = mode_family(Sector::Zero, -1, 6, &e3).unwrap();
    let mirror = mirror_coordinate(Sector::Zero, 10, &e3).unwrap();
    let w_lambda = w_phase_series(&kernel, &desc, -4, &e3).unwrap();
    let w_x = w_lambda.compose(&mirror.lambda_of_x).unwrap();
    let lhs = w_x.derivative();
    println!("lhs = {}", lhs);
    let seed = fam3.mode(0);
    let pair_x = seed
        .pairing(seed, &fam3.ctx, &e3.nu)
        .unwrap()
        .expand_at_infinity(SeriesVar::X, -6, &fam3.ctx)
        .unwrap();
    let (pair_lam_rat, ctx0) = descendant_zero_mode_pairing(Sector::Zero, &e3);
    let pair_lam = pair_lam_rat
        .eval_series(&mirror.lambda_of_x.truncated_below(-9), &ctx0)
        .unwrap();
    let phi = phi_locus(&fam3.ctx)
        .expand_at_infinity(SeriesVar::X, -6, &fam3.ctx)
        .unwrap();
    let rhs = pair_lam.sub(&pair_x).unwrap().mul(&phi).unwrap();
    println!("rhs = {}", rhs);
    let d = lhs.sub(&rhs).unwrap();
    println!("deriv diff = {}", d);
}
