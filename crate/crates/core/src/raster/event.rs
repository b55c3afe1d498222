use super::env::EnvStack;
use super::grid::BurntMask;
use crate::{Error, Result};

/// Smallest accepted duration is one more than this.
pub const MIN_DURATION_EXCLUSIVE: u32 = 4;

/// One fire: burnt masks for days 0, 1 and 2, the final burnt mask, and the
/// environmental stack.
#[derive(Clone, Debug, PartialEq)]
pub struct FireEvent {
    pub name: String,
    pub year: i32,
    pub duration_days: u32,
    pub day_masks: [BurntMask; 3],
    pub final_mask: BurntMask,
    pub env: EnvStack,
}

impl FireEvent {
    pub fn new(
        name: impl Into<String>,
        year: i32,
        duration_days: u32,
        day_masks: [BurntMask; 3],
        final_mask: BurntMask,
        env: EnvStack,
    ) -> Result<Self> {
        let event = FireEvent {
            name: name.into(),
            year,
            duration_days,
            day_masks,
            final_mask,
            env,
        };
        event.validate()?;
        Ok(event)
    }

    /// Checks duration, shared mask grid and the nesting
    /// day0 ⊆ day1 ⊆ day2 ⊆ final.
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidEvent {
            name: self.name.clone(),
            reason,
        };
        if self.duration_days <= MIN_DURATION_EXCLUSIVE {
            return Err(bad(format!(
                "duration {} days must exceed {MIN_DURATION_EXCLUSIVE}",
                self.duration_days
            )));
        }
        let spec = self.final_mask.spec();
        for (day, mask) in self.day_masks.iter().enumerate() {
            if mask.spec() != spec {
                return Err(bad(format!("day {day} mask grid differs from final mask grid")));
            }
        }
        let chain = [
            &self.day_masks[0],
            &self.day_masks[1],
            &self.day_masks[2],
            &self.final_mask,
        ];
        for (i, pair) in chain.windows(2).enumerate() {
            if !pair[0].is_subset_of(pair[1]) {
                let next = if i == 2 {
                    "final".to_string()
                } else {
                    format!("day {}", i + 1)
                };
                return Err(bad(format!("day {i} mask is not contained in {next} mask")));
            }
        }
        Ok(())
    }

    /// Day-2 mask: the common starting state for every predictor.
    pub fn day2(&self) -> &BurntMask {
        &self.day_masks[2]
    }
}
