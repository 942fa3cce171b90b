//! Label construction and the four pre-training losses: masked token
//! prediction, identifier prediction, AST edge prediction, and contrastive
//! alignment.

mod contrastive;
mod losses;
mod masking;
mod tep;

pub use contrastive::{
    build_contrastive_batch, paired_scheme_for_epoch, ContrastiveBatch, ContrastivePair, Member, PairingScheme,
};
pub use losses::{loss_ip, loss_ip_logits, loss_mcl, loss_mcl_terms, loss_mmlm, loss_tep, Reduction};
pub use masking::{mask_count, plan_mmlm, MaskPlan, Replacement, MASK_RATE_PERCENT};
pub use tep::{plan_tep, TepPlan};
