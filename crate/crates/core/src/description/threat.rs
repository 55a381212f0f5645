use super::{DescriptionFacts, ThreatLevel};

/// Weapons are high; an unrecognized person is medium, or high when masked;
/// a recognized person without a weapon is none.
pub fn assess_threat(facts: &DescriptionFacts) -> ThreatLevel {
    if facts.items.iter().any(|i| i.is_weapon()) {
        ThreatLevel::High
    } else if facts.is_unknown() {
        if facts.wears_mask() {
            ThreatLevel::High
        } else {
            ThreatLevel::Medium
        }
    } else {
        ThreatLevel::None
    }
}
