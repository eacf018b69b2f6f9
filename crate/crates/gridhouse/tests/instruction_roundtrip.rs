//! Closed-loop property: every generated instruction parses back to its
//! task triple, over the full template set, both splits, and varied
//! synonym draws.

use gridhouse::instruction::{
    generate_instruction, predict_context, Lexicon, SplitTag,
};
use gridhouse::plan::{classify_family, plan, Presence};
use gridhouse::world::{ObjectCategory, TaskFamily, TaskSpec};

use ObjectCategory::*;

fn tasks_for(family: TaskFamily) -> Vec<TaskSpec> {
    match family {
        TaskFamily::PickPlace => vec![
            TaskSpec::new(family, Apple, Table),
            TaskSpec::new(family, Knife, CounterTop),
            TaskSpec::new(family, SoapBar, GarbageCan),
            TaskSpec::new(family, TissueBox, Drawer),
            TaskSpec::new(family, Apple, Table).sliced(),
            TaskSpec::new(family, Potato, Shelf).sliced(),
        ],
        TaskFamily::PickTwoPlace => vec![
            TaskSpec::new(family, Apple, Table),
            TaskSpec::new(family, SoapBar, GarbageCan),
            TaskSpec::new(family, TissueBox, Shelf),
            TaskSpec::new(family, Tomato, CounterTop).sliced(),
        ],
        TaskFamily::CleanPlace => vec![
            TaskSpec::new(family, Spoon, Drawer),
            TaskSpec::new(family, Plate, Cabinet),
            TaskSpec::new(family, Cup, Shelf),
        ],
        TaskFamily::HeatPlace => vec![
            TaskSpec::new(family, Egg, CounterTop),
            TaskSpec::new(family, Bread, Table),
        ],
        TaskFamily::CoolPlace => vec![
            TaskSpec::new(family, Apple, Shelf),
            TaskSpec::new(family, Lettuce, CounterTop),
        ],
        TaskFamily::ExamineInLight => vec![
            TaskSpec::new(family, Watch, Lamp),
            TaskSpec::new(family, Mug, Lamp),
        ],
        TaskFamily::PickPlaceMovableReceptacle => vec![
            TaskSpec::with_mrecep(Apple, Mug, Table),
            TaskSpec::with_mrecep(Fork, Cup, SinkBasin),
            TaskSpec::with_mrecep(Watch, Bowl, Shelf),
            TaskSpec::with_mrecep(Egg, Pan, CounterTop),
        ],
    }
}

#[test]
fn round_trip_over_the_full_template_product() {
    let lexicon = Lexicon::builtin();
    let mut checked = 0u32;
    for family in TaskFamily::ALL {
        for task in tasks_for(family) {
            for split in [SplitTag::Seen, SplitTag::Unseen] {
                for seed in 0..24u64 {
                    let instr = generate_instruction(&task, &lexicon, seed, split)
                        .unwrap_or_else(|e| panic!("{family:?} seed {seed}: {e}"));
                    let ctx = predict_context(&instr, &lexicon)
                        .unwrap_or_else(|e| panic!("{instr} -> {e}"));
                    assert_eq!(ctx.target, task.target, "target mismatch on {instr:?}");
                    assert_eq!(ctx.carrier, task.mrecep, "carrier mismatch on {instr:?}");
                    assert_eq!(
                        ctx.destination,
                        Some(task.destination),
                        "destination mismatch on {instr:?}"
                    );
                    let presence = Presence {
                        carrier: ctx.carrier.is_some(),
                        destination: ctx.destination.is_some(),
                    };
                    let (fam, sliced) = classify_family(&instr, presence).unwrap();
                    assert_eq!(fam, task.family, "family misclassified on {instr:?}");
                    assert_eq!(sliced, task.target_sliced, "slice marker on {instr:?}");
                    checked += 1;
                }
            }
        }
    }
    assert!(checked > 1000, "product coverage too small: {checked}");
}

#[test]
fn surface_form_invariance_synonyms_share_the_context() {
    let lexicon = Lexicon::builtin();
    let task = TaskSpec::with_mrecep(Apple, Mug, Table);
    let mut contexts = Vec::new();
    for seed in 0..30u64 {
        let instr = generate_instruction(&task, &lexicon, seed, SplitTag::Unseen).unwrap();
        contexts.push(predict_context(&instr, &lexicon).unwrap());
    }
    for pair in contexts.windows(2) {
        assert_eq!(pair[0], pair[1], "synonym choice must not change the context");
    }
}

#[test]
fn plans_for_identical_tasks_are_identical_across_phrasings() {
    let lexicon = Lexicon::builtin();
    let task = TaskSpec::new(TaskFamily::CleanPlace, Spoon, Drawer);
    let mut plans = Vec::new();
    for seed in 0..12u64 {
        let instr = generate_instruction(&task, &lexicon, seed, SplitTag::Seen).unwrap();
        plans.push(plan(&instr, &lexicon).unwrap().sub_goals);
    }
    for pair in plans.windows(2) {
        assert_eq!(pair[0], pair[1]);
    }
}
