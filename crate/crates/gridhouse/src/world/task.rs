//! Task specifications and goal-condition evaluation.

use serde::{Deserialize, Serialize};

use super::{GridWorld, ObjectCategory, ObjectInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskFamily {
    PickPlace,
    PickTwoPlace,
    CleanPlace,
    HeatPlace,
    CoolPlace,
    ExamineInLight,
    PickPlaceMovableReceptacle,
}

impl TaskFamily {
    pub const ALL: [TaskFamily; 7] = [
        TaskFamily::PickPlace,
        TaskFamily::PickTwoPlace,
        TaskFamily::CleanPlace,
        TaskFamily::HeatPlace,
        TaskFamily::CoolPlace,
        TaskFamily::ExamineInLight,
        TaskFamily::PickPlaceMovableReceptacle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskFamily::PickPlace => "PickPlace",
            TaskFamily::PickTwoPlace => "PickTwoPlace",
            TaskFamily::CleanPlace => "CleanPlace",
            TaskFamily::HeatPlace => "HeatPlace",
            TaskFamily::CoolPlace => "CoolPlace",
            TaskFamily::ExamineInLight => "ExamineInLight",
            TaskFamily::PickPlaceMovableReceptacle => "PickPlaceMovableReceptacle",
        }
    }
}

/// A concrete task binding: family plus the object categories involved.
/// `target_sliced` marks variants whose target must first be sliced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub family: TaskFamily,
    pub target: ObjectCategory,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub target_sliced: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mrecep: Option<ObjectCategory>,
    pub destination: ObjectCategory,
}

impl TaskSpec {
    pub fn new(
        family: TaskFamily,
        target: ObjectCategory,
        destination: ObjectCategory,
    ) -> Self {
        TaskSpec {
            family,
            target,
            target_sliced: false,
            mrecep: None,
            destination,
        }
    }

    pub fn with_mrecep(
        target: ObjectCategory,
        mrecep: ObjectCategory,
        destination: ObjectCategory,
    ) -> Self {
        TaskSpec {
            family: TaskFamily::PickPlaceMovableReceptacle,
            target,
            target_sliced: false,
            mrecep: Some(mrecep),
            destination,
        }
    }

    pub fn sliced(mut self) -> Self {
        self.target_sliced = true;
        self
    }

    /// Derives the goal-condition list; fully determined by the task fields.
    pub fn goal_conditions(&self) -> Vec<GoalCondition> {
        let t = self.target;
        let d = self.destination;
        let mut conds = Vec::new();
        let req = StateReq {
            sliced: if self.target_sliced { Some(true) } else { None },
            clean: None,
            hot: None,
            cold: None,
        };
        match self.family {
            TaskFamily::PickPlace => {
                if self.target_sliced {
                    conds.push(GoalCondition::ExistsWithState {
                        category: t,
                        req,
                    });
                }
                conds.push(GoalCondition::PlacedIn {
                    category: t,
                    req,
                    destination: d,
                    count: 1,
                });
            }
            TaskFamily::PickTwoPlace => {
                if self.target_sliced {
                    conds.push(GoalCondition::ExistsWithState { category: t, req });
                }
                conds.push(GoalCondition::PlacedIn {
                    category: t,
                    req,
                    destination: d,
                    count: 1,
                });
                conds.push(GoalCondition::PlacedIn {
                    category: t,
                    req,
                    destination: d,
                    count: 2,
                });
            }
            TaskFamily::CleanPlace => {
                let req = StateReq {
                    clean: Some(true),
                    ..req
                };
                conds.push(GoalCondition::ExistsWithState { category: t, req });
                conds.push(GoalCondition::PlacedIn {
                    category: t,
                    req,
                    destination: d,
                    count: 1,
                });
            }
            TaskFamily::HeatPlace => {
                let req = StateReq {
                    hot: Some(true),
                    ..req
                };
                conds.push(GoalCondition::ExistsWithState { category: t, req });
                conds.push(GoalCondition::PlacedIn {
                    category: t,
                    req,
                    destination: d,
                    count: 1,
                });
            }
            TaskFamily::CoolPlace => {
                let req = StateReq {
                    cold: Some(true),
                    ..req
                };
                conds.push(GoalCondition::ExistsWithState { category: t, req });
                conds.push(GoalCondition::PlacedIn {
                    category: t,
                    req,
                    destination: d,
                    count: 1,
                });
            }
            TaskFamily::ExamineInLight => {
                conds.push(GoalCondition::Holding { category: t });
                conds.push(GoalCondition::HoldingUnderLight {
                    category: t,
                    lamp: d,
                });
            }
            TaskFamily::PickPlaceMovableReceptacle => {
                let m = self.mrecep.expect("mrecep present for this family");
                conds.push(GoalCondition::InsideCarrier {
                    category: t,
                    carrier: m,
                });
                conds.push(GoalCondition::CarrierPlaced {
                    category: t,
                    carrier: m,
                    destination: d,
                });
            }
        }
        conds
    }

    pub fn check(&self, world: &GridWorld) -> GoalReport {
        let conds = self.goal_conditions();
        let satisfied = conds.iter().filter(|c| c.eval(world)).count() as u32;
        let total = conds.len() as u32;
        GoalReport {
            satisfied,
            total,
            success: satisfied == total,
        }
    }
}

/// Required state flags; `None` entries are unconstrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateReq {
    pub sliced: Option<bool>,
    pub clean: Option<bool>,
    pub hot: Option<bool>,
    pub cold: Option<bool>,
}

impl StateReq {
    fn matches(&self, inst: &ObjectInstance) -> bool {
        self.sliced.map_or(true, |v| inst.state.sliced == v)
            && self.clean.map_or(true, |v| !inst.state.dirty == v)
            && self.hot.map_or(true, |v| inst.state.hot == v)
            && self.cold.map_or(true, |v| inst.state.cold == v)
    }
}

/// A pure predicate over world state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GoalCondition {
    /// At least `count` distinct instances of `category` matching `req`
    /// sit inside/on a receptacle of `destination`'s category.
    PlacedIn {
        category: ObjectCategory,
        req: StateReq,
        destination: ObjectCategory,
        count: u32,
    },
    /// Some instance of `category` matches the state requirement.
    ExistsWithState {
        category: ObjectCategory,
        req: StateReq,
    },
    /// The agent holds an instance of `category`.
    Holding { category: ObjectCategory },
    /// The agent holds `category` while some `lamp` instance is on.
    HoldingUnderLight {
        category: ObjectCategory,
        lamp: ObjectCategory,
    },
    /// Some instance of `category` sits inside a `carrier` instance.
    InsideCarrier {
        category: ObjectCategory,
        carrier: ObjectCategory,
    },
    /// Some `carrier` holding `category` sits on the destination.
    CarrierPlaced {
        category: ObjectCategory,
        carrier: ObjectCategory,
        destination: ObjectCategory,
    },
}

impl GoalCondition {
    pub fn eval(&self, world: &GridWorld) -> bool {
        match *self {
            GoalCondition::PlacedIn {
                category,
                req,
                destination,
                count,
            } => {
                let n = world
                    .instances_of(category)
                    .filter(|i| req.matches(i))
                    .filter(|i| {
                        i.parent
                            .and_then(|p| world.instance(p))
                            .map(|p| p.category == destination)
                            .unwrap_or(false)
                    })
                    .count() as u32;
                n >= count
            }
            GoalCondition::ExistsWithState { category, req } => {
                world.instances_of(category).any(|i| req.matches(i))
            }
            GoalCondition::Holding { category } => world
                .pose
                .held
                .and_then(|id| world.instance(id))
                .map(|i| i.category == category)
                .unwrap_or(false),
            GoalCondition::HoldingUnderLight { category, lamp } => {
                let holding = world
                    .pose
                    .held
                    .and_then(|id| world.instance(id))
                    .map(|i| i.category == category)
                    .unwrap_or(false);
                holding && world.instances_of(lamp).any(|l| l.state.toggled_on)
            }
            GoalCondition::InsideCarrier { category, carrier } => world
                .instances_of(category)
                .any(|i| {
                    i.parent
                        .and_then(|p| world.instance(p))
                        .map(|p| p.category == carrier)
                        .unwrap_or(false)
                }),
            GoalCondition::CarrierPlaced {
                category,
                carrier,
                destination,
            } => world.instances_of(carrier).any(|m| {
                let on_dest = m
                    .parent
                    .and_then(|p| world.instance(p))
                    .map(|p| p.category == destination)
                    .unwrap_or(false);
                let holds_target = m.contents.iter().any(|c| {
                    world
                        .instance(*c)
                        .map(|i| i.category == category)
                        .unwrap_or(false)
                });
                on_dest && holds_target
            }),
        }
    }
}

/// Result of checking a task against a world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalReport {
    pub satisfied: u32,
    pub total: u32,
    pub success: bool,
}

impl GoalReport {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.satisfied as f64 / self.total as f64
        }
    }
}
