//! Blind ring sum. The coordinator opens the ring with an encrypted random
//! mask, each party folds in its own ciphertext, and the coordinator removes
//! the mask at the end. Intermediate parties only ever see a rerandomized
//! running total.

use num_bigint::{BigInt, BigUint, Sign};
use rand::RngCore;

use super::{SecError, SecureContext};
use crate::paillier::Ciphertext;

/// The coordinator's private state for one ring pass.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmAddSeed {
    mask: BigUint,
    scale: u32,
}

impl SmAddSeed {
    pub fn scale(&self) -> u32 {
        self.scale
    }
}

pub fn sm_add_start<R: RngCore + ?Sized>(
    ctx: &SecureContext,
    scale: u32,
    rng: &mut R,
) -> Result<(SmAddSeed, Ciphertext), SecError> {
    let mask = ctx.pk().random_plaintext(rng);
    sm_add_start_with_mask(ctx, mask, scale, rng)
}

pub fn sm_add_start_with_mask<R: RngCore + ?Sized>(
    ctx: &SecureContext,
    mask: BigUint,
    scale: u32,
    rng: &mut R,
) -> Result<(SmAddSeed, Ciphertext), SecError> {
    ctx.check_scale(scale)?;
    let c = ctx.pk().encrypt_scaled(&mask, scale, rng)?;
    Ok((SmAddSeed { mask, scale }, c))
}

pub fn sm_add_fold<R: RngCore + ?Sized>(
    ctx: &SecureContext,
    running: &Ciphertext,
    contribution: &Ciphertext,
    rng: &mut R,
) -> Result<Ciphertext, SecError> {
    let pk = ctx.pk();
    Ok(pk.rerandomize(&pk.hom_add(running, contribution)?, rng))
}

pub fn sm_add_finish(ctx: &SecureContext, seed: &SmAddSeed, running: &Ciphertext) -> Result<Ciphertext, SecError> {
    if running.scale() != seed.scale {
        return Err(SecError::ScaleMismatch(seed.scale, running.scale()));
    }
    Ok(ctx
        .pk()
        .add_plain(running, &BigInt::from_biguint(Sign::Minus, seed.mask.clone())))
}

/// Single-process ring over `contributions` in order.
pub fn sm_add<R: RngCore + ?Sized>(
    ctx: &SecureContext,
    contributions: &[Ciphertext],
    rng: &mut R,
) -> Result<Ciphertext, SecError> {
    let scale = contributions
        .first()
        .ok_or_else(|| SecError::RingBreak("no contributions".into()))?
        .scale();
    let (seed, mut running) = sm_add_start(ctx, scale, rng)?;
    for c in contributions {
        running = sm_add_fold(ctx, &running, c, rng)?;
    }
    sm_add_finish(ctx, &seed, &running)
}
