//! The closed object vocabulary and per-category capability flags.
//!
//! The vocabulary is fixed at world-generation time; capabilities never
//! change during an episode.

use serde::{Deserialize, Serialize};

macro_rules! categories {
    ($($name:ident),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum ObjectCategory {
            $($name,)*
        }

        impl ObjectCategory {
            pub const ALL: &'static [ObjectCategory] = &[$(ObjectCategory::$name,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(ObjectCategory::$name => stringify!($name),)*
                }
            }

            pub fn from_name(name: &str) -> Option<Self> {
                match name {
                    $(stringify!($name) => Some(ObjectCategory::$name),)*
                    _ => None,
                }
            }
        }
    };
}

categories!(
    Apple, Bowl, Bread, Cabinet, CounterTop, Cup, Drawer, Egg, Faucet, Fork, Fridge, GarbageCan,
    Knife, Ladle, Lamp, Lettuce, Microwave, Mug, Pan, Plate, Potato, Shelf, SinkBasin, SoapBar,
    SoapBottle, Spoon, Table, TissueBox, Tomato, Watch,
);

impl std::fmt::Display for ObjectCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl ObjectCategory {
    pub fn pickupable(self) -> bool {
        use ObjectCategory::*;
        matches!(
            self,
            Apple
                | Bowl
                | Bread
                | Cup
                | Egg
                | Fork
                | Knife
                | Ladle
                | Lettuce
                | Mug
                | Pan
                | Plate
                | Potato
                | SoapBar
                | SoapBottle
                | Spoon
                | TissueBox
                | Watch
        )
    }

    pub fn openable(self) -> bool {
        use ObjectCategory::*;
        matches!(self, Cabinet | Drawer | Fridge | Microwave)
    }

    pub fn toggleable(self) -> bool {
        use ObjectCategory::*;
        matches!(self, Faucet | Lamp | Microwave)
    }

    pub fn sliceable(self) -> bool {
        use ObjectCategory::*;
        matches!(self, Apple | Bread | Egg | Lettuce | Potato | Tomato)
    }

    pub fn receptacle(self) -> bool {
        use ObjectCategory::*;
        matches!(
            self,
            Bowl | Cabinet
                | CounterTop
                | Cup
                | Drawer
                | Fridge
                | GarbageCan
                | Microwave
                | Mug
                | Pan
                | Plate
                | Shelf
                | SinkBasin
                | Table
        )
    }

    /// Receptacles that can themselves be picked up and carried.
    pub fn movable_receptacle(self) -> bool {
        use ObjectCategory::*;
        matches!(self, Bowl | Cup | Mug | Pan | Plate)
    }

    /// Surfaces that leave their contents in plain view (never closed).
    pub fn open_surface(self) -> bool {
        use ObjectCategory::*;
        matches!(self, CounterTop | Shelf | SinkBasin | Table)
    }
}
