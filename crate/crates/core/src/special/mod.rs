pub mod products;
pub mod qfunc;
pub mod theta;
pub mod weierstrass;

pub use products::{dedekind_eta, q0, qpochhammer, theta_e};
pub use qfunc::{q_gamma, q_sine};
pub use theta::{
    theta, theta1, theta1_dv, theta1_prime_zero, theta_ln, theta_log_deriv, theta_mu, theta_real, theta_with_dv, ModularNome, Theta,
};
pub use weierstrass::{
    eta1, weierstrass_p, weierstrass_p_c, weierstrass_zeta, weierstrass_zeta_c, weierstrass_zeta_centered,
    zeta_centered_c, HalfPeriods,
};
