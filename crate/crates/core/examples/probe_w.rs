
use hqe_core::fock::Sector;
use hqe_core::ratfun::{LocusRat, QuadField, XPoly};
use hqe_core::scalar::*;
use hqe_core::series::{SeriesVar, TruncSeries};
use hqe_core::smatrix::*;
use hqe_core::vertex::{mode_family, step_up, ModeVector};

type P = RatScalar;

fn main() {
    let a3 = Assignment::random(77, 3);
    let e = ParamEnv::<P>::at(&a3);
    let s_sym = s_matrix(3, 6, &ParamEnv::symbolic()).unwrap();
    let sp = eval_smatrix(&s_sym, &a3).unwrap();
    let kernel = w_kernel(&sp);
    let mirror = mirror_coordinate(Sector::Zero, 10, &e).unwrap();

    // lambda-side descendant modes (s = 0 ladder, upward only)
    let ctx0 = QuadField::new(e.nu.clone(), P::zero());
    let seed = ModeVector {
        c0: LocusRat::new(XPoly::x().pow(2).neg(), 0, 1, &ctx0),
        cinf: LocusRat::zero(),
    };
    let mut modes = vec![seed.clone()];
    for _ in 0..6 {
        modes.push(step_up(modes.last().unwrap(), &ctx0).unwrap());
    }
    let lo = -6i64;
    let nu_inv = e.nu.inv().unwrap();
    let mut acc: TruncSeries<P> = TruncSeries::zero(SeriesVar::Lambda).truncated_below(lo);
    for k in 0..=5i64 {
        for l in 0..=5i64 {
            if k + l > 5 { continue; }
            let w = kernel.get(k, l);
            let (l0, li) = (
                modes[l as usize].c0.expand_at_infinity(SeriesVar::Lambda, lo, &ctx0).unwrap(),
                modes[l as usize].cinf.expand_at_infinity(SeriesVar::Lambda, lo, &ctx0).unwrap(),
            );
            let (k0, ki) = (
                modes[k as usize].c0.expand_at_infinity(SeriesVar::Lambda, lo, &ctx0).unwrap(),
                modes[k as usize].cinf.expand_at_infinity(SeriesVar::Lambda, lo, &ctx0).unwrap(),
            );
            let wv0 = l0.scale(&w.a00).add(&li.scale(&w.a0i)).unwrap();
            let wvi = l0.scale(&w.ai0).add(&li.scale(&w.aii)).unwrap();
            let paired = wv0.mul(&k0).unwrap().sub(&wvi.mul(&ki).unwrap()).unwrap().scale(&nu_inv);
            let sign = if (k + l).rem_euclid(2) == 0 { 1 } else { -1 };
            acc = acc.add(&paired.scale(&P::from_int(sign))).unwrap();
        }
    }
    println!("lambda-side W: {}", acc);

    // closed form in lambda: C0 + 2s/(nu x(lam)) + log(lam(lam-nu)/(x^2-nu x-s))
    let c0 = phase_constant(Sector::Zero, &e);
    let x = mirror.x_of_lambda.truncated_below(lo - 3);
    let xinv = x.recip().unwrap();
    let lam = TruncSeries::<P>::monomial(SeriesVar::Lambda, 1, P::one());
    let lam_minus = lam.sub(&TruncSeries::constant(SeriesVar::Lambda, e.nu.clone())).unwrap();
    let dser = x.mul(&x).unwrap()
        .sub(&x.scale(&e.nu)).unwrap()
        .sub(&TruncSeries::constant(SeriesVar::Lambda, e.s.clone())).unwrap();
    let ratio = lam.mul(&lam_minus).unwrap().mul(&dser.recip().unwrap()).unwrap();
    let logr = ratio.log().unwrap();
    let closed = TruncSeries::constant(SeriesVar::Lambda, c0)
        .add(&xinv.scale(&e.s.mul(&nu_inv).mul_int(2))).unwrap()
        .add(&logr).unwrap();
    println!("closed (lambda): {}", closed);
    let diff = acc.sub(&closed).unwrap();
    println!("diff: {}", diff);

    // x-side full modes version, composed into lambda via x(lambda), for comparison
    let fam3 = mode_family(Sector::Zero, -1, 6, &e).unwrap();
    let wx = w_phase_series(&kernel, &fam3, SeriesVar::X, -5, &e).unwrap();
    let wx_lam = wx.compose(&mirror.x_of_lambda).unwrap();
    println!("x-side W composed to lambda: {}", wx_lam);
    let diff2 = wx_lam.sub(&closed).unwrap();
    println!("diff x-side: {}", diff2);
}
