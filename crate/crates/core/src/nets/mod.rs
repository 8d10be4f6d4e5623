//! Actor and critic networks, action distributions and checkpoints.

pub mod checkpoint;
mod dist;
mod mlp;

pub use dist::{
    clamp_log_std, decision_of, to_vehicle_action, Categorical, DiagGaussian, GO, LOG_STD_MAX,
    LOG_STD_MIN, WAIT,
};
pub use mlp::{
    param_count, Arch, ForwardCache, Mlp, CRITIC_ARCH, HIDDEN_GAIN, PED_ARCH, POLICY_OUTPUT_GAIN,
    SDC_ARCH, VALUE_OUTPUT_GAIN,
};

use crate::{Error, Result};

pub const INITIAL_LOG_STD: f64 = -0.5;
/// Initial bias of the vehicle actor's acceleration output. A fresh policy
/// drives forward at full throttle on average, so early rollouts reach goals.
pub const INITIAL_THROTTLE_BIAS: f64 = 1.0;

/// The shared pedestrian actor, the vehicle actor with its state-independent
/// log-std, and the centralized critic.
#[derive(Debug, Clone, PartialEq)]
pub struct Policies {
    pub ped: Mlp,
    pub sdc: Mlp,
    pub sdc_log_std: [f64; 2],
    pub critic: Mlp,
}

impl Policies {
    pub fn init(seed: u64) -> Self {
        let s = seed.wrapping_mul(4);
        let mut sdc = Mlp::init(SDC_ARCH, POLICY_OUTPUT_GAIN, s.wrapping_add(1));
        let (_, out_bias) = sdc.layer_offsets(2);
        sdc.params[out_bias] = INITIAL_THROTTLE_BIAS;
        Self {
            ped: Mlp::init(PED_ARCH, POLICY_OUTPUT_GAIN, s),
            sdc,
            sdc_log_std: [INITIAL_LOG_STD; 2],
            critic: Mlp::init(CRITIC_ARCH, VALUE_OUTPUT_GAIN, s.wrapping_add(2)),
        }
    }

    pub fn check_arch(&self) -> Result<()> {
        for (net, want, what) in [
            (&self.ped, PED_ARCH, "pedestrian actor"),
            (&self.sdc, SDC_ARCH, "vehicle actor"),
            (&self.critic, CRITIC_ARCH, "critic"),
        ] {
            if net.arch != want {
                return Err(Error::Checkpoint(format!(
                    "{what} has shape {:?}, expected {want:?}",
                    net.arch
                )));
            }
        }
        Ok(())
    }

    pub fn sdc_dist(&self, mean: &[f64]) -> DiagGaussian {
        DiagGaussian::new(mean, &self.sdc_log_std)
    }
}
