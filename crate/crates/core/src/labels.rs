//! Call-type labels and the master-class grouping.
//!
//! Eight subclasses are grouped into four master classes:
//!
//! | master       | members                          |
//! |--------------|----------------------------------|
//! | Food calls   | Food calls, Distress, Panic      |
//! | Egg laying   | Egg laying                       |
//! | Fear         | Fear, Alarm, Gakel calls         |
//! | Lonely calls | Lonely calls                     |

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const NUM_SUBCLASSES: usize = 8;
pub const NUM_MASTERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subclass {
    FoodCalls = 0,
    Distress = 1,
    Panic = 2,
    EggLaying = 3,
    Fear = 4,
    Alarm = 5,
    GakelCalls = 6,
    LonelyCalls = 7,
}

impl Subclass {
    pub const ALL: [Subclass; NUM_SUBCLASSES] = [
        Subclass::FoodCalls,
        Subclass::Distress,
        Subclass::Panic,
        Subclass::EggLaying,
        Subclass::Fear,
        Subclass::Alarm,
        Subclass::GakelCalls,
        Subclass::LonelyCalls,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn master(self) -> MasterClass {
        match self {
            Subclass::FoodCalls | Subclass::Distress | Subclass::Panic => MasterClass::FoodCalls,
            Subclass::EggLaying => MasterClass::EggLaying,
            Subclass::Fear | Subclass::Alarm | Subclass::GakelCalls => MasterClass::Fear,
            Subclass::LonelyCalls => MasterClass::LonelyCalls,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Subclass::FoodCalls => "food_calls",
            Subclass::Distress => "distress",
            Subclass::Panic => "panic",
            Subclass::EggLaying => "egg_laying",
            Subclass::Fear => "fear",
            Subclass::Alarm => "alarm",
            Subclass::GakelCalls => "gakel_calls",
            Subclass::LonelyCalls => "lonely_calls",
        }
    }
}

impl fmt::Display for Subclass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subclass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace([' ', '-'], "_");
        Subclass::ALL
            .iter()
            .copied()
            .find(|c| c.name() == key || c.name().trim_end_matches("_calls") == key)
            .ok_or_else(|| Error::InvalidLabels(format!("unknown call type `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MasterClass {
    FoodCalls = 0,
    EggLaying = 1,
    Fear = 2,
    LonelyCalls = 3,
}

impl MasterClass {
    pub const ALL: [MasterClass; NUM_MASTERS] = [
        MasterClass::FoodCalls,
        MasterClass::EggLaying,
        MasterClass::Fear,
        MasterClass::LonelyCalls,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Member subclasses in subclass order.
    pub fn members(self) -> &'static [Subclass] {
        match self {
            MasterClass::FoodCalls => &[Subclass::FoodCalls, Subclass::Distress, Subclass::Panic],
            MasterClass::EggLaying => &[Subclass::EggLaying],
            MasterClass::Fear => &[Subclass::Fear, Subclass::Alarm, Subclass::GakelCalls],
            MasterClass::LonelyCalls => &[Subclass::LonelyCalls],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MasterClass::FoodCalls => "food_calls",
            MasterClass::EggLaying => "egg_laying",
            MasterClass::Fear => "fear",
            MasterClass::LonelyCalls => "lonely_calls",
        }
    }
}

impl fmt::Display for MasterClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Eight subclass indicators plus the four master indicators they induce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LabelVector {
    subclass: [bool; NUM_SUBCLASSES],
    master: [bool; NUM_MASTERS],
}

impl LabelVector {
    /// Builds a label vector from subclass indicators; master bits are derived.
    pub fn from_subclasses(subclass: [bool; NUM_SUBCLASSES]) -> Result<Self> {
        if !subclass.iter().any(|&b| b) {
            return Err(Error::InvalidLabels("no subclass set".into()));
        }
        let mut master = [false; NUM_MASTERS];
        for c in Subclass::ALL {
            if subclass[c.index()] {
                master[c.master().index()] = true;
            }
        }
        Ok(Self { subclass, master })
    }

    /// Builds a label vector from explicit subclass and master bits, rejecting
    /// master bits that are not the OR of their members.
    pub fn new(subclass: [bool; NUM_SUBCLASSES], master: [bool; NUM_MASTERS]) -> Result<Self> {
        let derived = Self::from_subclasses(subclass)?;
        if derived.master != master {
            return Err(Error::InvalidLabels(format!(
                "master bits {master:?} inconsistent with subclasses {subclass:?}"
            )));
        }
        Ok(derived)
    }

    pub fn single(c: Subclass) -> Self {
        let mut s = [false; NUM_SUBCLASSES];
        s[c.index()] = true;
        Self::from_subclasses(s).expect("one subclass set")
    }

    pub fn from_classes(classes: &[Subclass]) -> Result<Self> {
        let mut s = [false; NUM_SUBCLASSES];
        for c in classes {
            s[c.index()] = true;
        }
        Self::from_subclasses(s)
    }

    pub fn subclass(&self) -> &[bool; NUM_SUBCLASSES] {
        &self.subclass
    }

    pub fn master(&self) -> &[bool; NUM_MASTERS] {
        &self.master
    }

    pub fn has(&self, c: Subclass) -> bool {
        self.subclass[c.index()]
    }

    pub fn classes(&self) -> Vec<Subclass> {
        Subclass::ALL
            .iter()
            .copied()
            .filter(|c| self.has(*c))
            .collect()
    }

    /// Lowest-index subclass set; used as the stratum and as the single-label truth.
    pub fn primary(&self) -> Subclass {
        self.classes()[0]
    }

    pub fn to_bitmask(&self) -> u8 {
        self.subclass
            .iter()
            .enumerate()
            .fold(0u8, |m, (i, &b)| if b { m | (1 << i) } else { m })
    }

    pub fn from_bitmask(mask: u8) -> Result<Self> {
        let mut s = [false; NUM_SUBCLASSES];
        for (i, bit) in s.iter_mut().enumerate() {
            *bit = mask & (1 << i) != 0;
        }
        Self::from_subclasses(s)
    }

    /// Subclass indicators as 0/1 reals.
    pub fn subclass_targets(&self) -> [f64; NUM_SUBCLASSES] {
        self.subclass.map(|b| if b { 1.0 } else { 0.0 })
    }

    pub fn master_targets(&self) -> [f64; NUM_MASTERS] {
        self.master.map(|b| if b { 1.0 } else { 0.0 })
    }
}

impl fmt::Display for LabelVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.classes().iter().map(|c| c.name()).collect();
        f.write_str(&names.join(","))
    }
}

impl FromStr for LabelVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let classes = s
            .split(',')
            .filter(|p| !p.trim().is_empty())
            .map(Subclass::from_str)
            .collect::<Result<Vec<_>>>()?;
        Self::from_classes(&classes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn master_is_or_of_members() {
        let l = LabelVector::from_classes(&[Subclass::Distress, Subclass::Panic]).unwrap();
        assert_eq!(l.master(), &[true, false, false, false]);
        let l = LabelVector::single(Subclass::GakelCalls);
        assert_eq!(l.master(), &[false, false, true, false]);
    }

    #[test]
    fn inconsistent_master_rejected() {
        let mut s = [false; 8];
        s[Subclass::Fear.index()] = true;
        assert!(LabelVector::new(s, [true, false, false, false]).is_err());
        assert!(LabelVector::new(s, [false, false, true, false]).is_ok());
    }

    #[test]
    fn empty_rejected() {
        assert!(LabelVector::from_subclasses([false; 8]).is_err());
        assert!(LabelVector::from_bitmask(0).is_err());
    }

    #[test]
    fn text_and_bitmask_round_trip() {
        let l = LabelVector::from_classes(&[Subclass::Fear, Subclass::Alarm]).unwrap();
        assert_eq!(l.to_string(), "fear,alarm");
        assert_eq!(l.to_string().parse::<LabelVector>().unwrap(), l);
        assert_eq!(LabelVector::from_bitmask(l.to_bitmask()).unwrap(), l);
        assert_eq!("Lonely".parse::<Subclass>().unwrap(), Subclass::LonelyCalls);
    }
}
