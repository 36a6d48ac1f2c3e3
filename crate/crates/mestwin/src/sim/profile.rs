use serde::{Deserialize, Serialize};

/// Named disruption scenario layered on top of a template's baseline
/// parameters. The stable profile injects nothing: baseline downtime and
/// expedite rates apply unchanged and no supply delays occur.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisruptionProfile {
    pub name: String,
    pub downtime_multiplier: f64,
    pub supply_delay_prob: f64,
    pub supply_delay_duration_min: (u32, u32),
    pub expedite_multiplier: f64,
}

impl DisruptionProfile {
    pub fn stable() -> Self {
        DisruptionProfile {
            name: "stable".into(),
            downtime_multiplier: 1.0,
            supply_delay_prob: 0.0,
            supply_delay_duration_min: (240, 1440),
            expedite_multiplier: 1.0,
        }
    }

    pub fn supply_crunch() -> Self {
        DisruptionProfile {
            name: "supply_crunch".into(),
            downtime_multiplier: 1.0,
            supply_delay_prob: 0.08,
            supply_delay_duration_min: (480, 2880),
            expedite_multiplier: 2.0,
        }
    }

    pub fn breakdown_wave() -> Self {
        DisruptionProfile {
            name: "breakdown_wave".into(),
            downtime_multiplier: 5.0,
            supply_delay_prob: 0.0,
            supply_delay_duration_min: (240, 1440),
            expedite_multiplier: 1.0,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "stable" => Some(Self::stable()),
            "supply_crunch" => Some(Self::supply_crunch()),
            "breakdown_wave" => Some(Self::breakdown_wave()),
            _ => None,
        }
    }

    pub fn names() -> [&'static str; 3] {
        ["stable", "supply_crunch", "breakdown_wave"]
    }

    /// True when this profile adds no disruptions beyond the baseline.
    pub fn injects_nothing(&self) -> bool {
        self.downtime_multiplier == 1.0 && self.supply_delay_prob == 0.0 && self.expedite_multiplier == 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_injects_no_disruptions() {
        assert!(DisruptionProfile::stable().injects_nothing());
        assert!(!DisruptionProfile::supply_crunch().injects_nothing());
        assert!(!DisruptionProfile::breakdown_wave().injects_nothing());
    }

    #[test]
    fn profiles_resolve_by_name() {
        for name in DisruptionProfile::names() {
            assert_eq!(DisruptionProfile::by_name(name).unwrap().name, name);
        }
        assert!(DisruptionProfile::by_name("calm").is_none());
    }
}
