//! The momentum change `p = T(q)𝐩` on the cart-pendulum: the matrices, the
//! transformed interconnection blocks and the two-route consistency checks.

use nalgebra::dvector;

use phia::{CartPendulum, PlantState};

fn main() -> phia::Result<()> {
    let cp = CartPendulum::fig1()?;
    let ts = cp.transform()?;
    let s = PlantState::new(dvector![0.4, -0.3], dvector![0.8, -0.5]);

    let t = ts.t_matrix(&s.q)?;
    println!("T(q) = {t}");
    println!("T G = {}", &t * cp.system().input_matrix(&s.q));
    println!("closed-form T deviation: {:.2e}", (&t - cp.closed_form_t(&s.q)).amax());

    let p = ts.to_transformed(&s)?;
    println!("p = T 𝐩 = {:?}", p.as_slice());
    println!("transformed mass T 𝐌_d Tᵀ = {}", ts.transformed_mass(&s.q)?);

    let blocks = ts.s_blocks(&s.q, &p)?;
    println!("S1 = {:?}, S2 = {:?}", blocks.s1.as_slice(), blocks.s2.as_slice());
    println!("S31 = {:?}, S32 = {:?}, S34 = {:?}", blocks.s31.as_slice(), blocks.s32.as_slice(), blocks.s34.as_slice());
    println!("closed-form S1 deviation: {:.2e}", (&blocks.s1 - cp.closed_form_s1(&s.q)).amax());
    println!("closed-form S32 deviation: {:.2e}", (&blocks.s32 - cp.closed_form_s32(&s.q, &p)?).amax());

    let (u, d) = (dvector![1.5], dvector![0.7]);
    println!("push-forward residual (closed-form ∂T⁻¹): {:.2e}", ts.verify_pushforward(&s, &u, &d)?);
    println!("push-forward residual (finite differences): {:.2e}", ts.finite_difference_only().verify_pushforward(&s, &u, &d)?);
    println!("passive-output equivalence residual: {:.2e}", ts.output_equivalence(&s)?);
    Ok(())
}
