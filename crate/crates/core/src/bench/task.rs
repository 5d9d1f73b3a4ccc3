use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    PhenotypingEstimation,
    EnvironmentalStress,
    GermplasmScreening,
    CultivationRecommendation,
    SeedPriceQuery,
}

impl Task {
    pub const ALL: [Task; 5] = [
        Task::PhenotypingEstimation,
        Task::EnvironmentalStress,
        Task::GermplasmScreening,
        Task::CultivationRecommendation,
        Task::SeedPriceQuery,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::PhenotypingEstimation => "phenotyping_estimation",
            Task::EnvironmentalStress => "environmental_stress",
            Task::GermplasmScreening => "germplasm_screening",
            Task::CultivationRecommendation => "cultivation_recommendation",
            Task::SeedPriceQuery => "seed_price_query",
        }
    }

    pub fn subtasks(self) -> &'static [Subtask] {
        use Subtask::*;
        match self {
            Task::PhenotypingEstimation => &[Yield, SPAD, LAI, CH, CV, WH, PL],
            Task::EnvironmentalStress => &[WL, FVC],
            Task::GermplasmScreening => &[HQ, DS, DR, MP, AM],
            Task::CultivationRecommendation => &[CT, PPT],
            Task::SeedPriceQuery => &[SP],
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown task `{s}`")))
    }
}

#[allow(clippy::upper_case_acronyms)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subtask {
    Yield,
    SPAD,
    LAI,
    CH,
    CV,
    WH,
    PL,
    WL,
    FVC,
    HQ,
    DS,
    DR,
    MP,
    AM,
    CT,
    PPT,
    SP,
}

impl Subtask {
    pub const ALL: [Subtask; 17] = {
        use Subtask::*;
        [Yield, SPAD, LAI, CH, CV, WH, PL, WL, FVC, HQ, DS, DR, MP, AM, CT, PPT, SP]
    };

    pub fn name(self) -> &'static str {
        use Subtask::*;
        match self {
            Yield => "Yield",
            SPAD => "SPAD",
            LAI => "LAI",
            CH => "CH",
            CV => "CV",
            WH => "WH",
            PL => "PL",
            WL => "WL",
            FVC => "FVC",
            HQ => "HQ",
            DS => "DS",
            DR => "DR",
            MP => "MP",
            AM => "AM",
            CT => "CT",
            PPT => "PPT",
            SP => "SP",
        }
    }

    pub fn task(self) -> Task {
        Task::ALL
            .into_iter()
            .find(|t| t.subtasks().contains(&self))
            .expect("every subtask belongs to a task")
    }

    pub fn answer_kind(self) -> AnswerKind {
        use Subtask::*;
        match self {
            Yield | SPAD | LAI | CH | CV | WH | FVC => AnswerKind::NumericRegression,
            PL | WL => AnswerKind::Categorical,
            HQ | DS | DR | MP | AM | CT | PPT => AnswerKind::JudgedCorrectness,
            SP => AnswerKind::PriceConsistency,
        }
    }
}

impl fmt::Display for Subtask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subtask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Subtask::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown subtask `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerKind {
    NumericRegression,
    Categorical,
    JudgedCorrectness,
    PriceConsistency,
}

impl AnswerKind {
    pub fn name(self) -> &'static str {
        match self {
            AnswerKind::NumericRegression => "numeric_regression",
            AnswerKind::Categorical => "categorical",
            AnswerKind::JudgedCorrectness => "judged_correctness",
            AnswerKind::PriceConsistency => "price_consistency",
        }
    }
}

/// A subtask together with its task and answer kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task: Task,
    pub subtask: Subtask,
    pub answer_kind: AnswerKind,
}

impl TaskSpec {
    pub fn of(subtask: Subtask) -> Self {
        Self {
            task: subtask.task(),
            subtask,
            answer_kind: subtask.answer_kind(),
        }
    }

    /// Checks that `subtask` belongs to `task`.
    pub fn new(task: Task, subtask: Subtask) -> Result<Self> {
        if subtask.task() != task {
            return Err(Error::InvalidTrialSet(format!(
                "subtask {subtask} belongs to {}, not {task}",
                subtask.task()
            )));
        }
        Ok(Self::of(subtask))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_membership() {
        let counts: Vec<usize> = Task::ALL.iter().map(|t| t.subtasks().len()).collect();
        assert_eq!(counts, vec![7, 2, 5, 2, 1]);
        assert_eq!(Subtask::PL.task(), Task::PhenotypingEstimation);
        assert_eq!(Subtask::FVC.task(), Task::EnvironmentalStress);
        assert_eq!(Subtask::PL.answer_kind(), AnswerKind::Categorical);
        assert_eq!(Subtask::FVC.answer_kind(), AnswerKind::NumericRegression);
        assert_eq!(Subtask::SP.answer_kind(), AnswerKind::PriceConsistency);
        assert!(TaskSpec::new(Task::SeedPriceQuery, Subtask::HQ).is_err());
    }

    #[test]
    fn names_round_trip() {
        for s in Subtask::ALL {
            assert_eq!(s.name().parse::<Subtask>().unwrap(), s);
        }
        for t in Task::ALL {
            assert_eq!(t.name().parse::<Task>().unwrap(), t);
        }
    }
}
