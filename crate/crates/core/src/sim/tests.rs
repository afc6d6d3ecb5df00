use super::scenario::{GoalSpec, MapSpec, ObjectSpec, RobotSpec, SimSpec};
use super::*;
use crate::geometry::{rectangle, translate};
use crate::grid::GridGeometry;
use crate::world::{ClassName, ClassTable, RobotParams};

fn corridor(objects: Vec<ObjectSpec>) -> Scenario {
    Scenario {
        format: 1,
        map: MapSpec {
            width_m: 6.0,
            height_m: 1.4,
            resolution: 0.05,
            static_polygons: vec![
                translate(&rectangle(6.0, 0.1), Point2::new(3.0, 0.05)),
                translate(&rectangle(6.0, 0.1), Point2::new(3.0, 1.35)),
            ],
        },
        robot: RobotSpec::with_params(Pose2D::new(0.5, 0.7, 0.0), RobotParams::default()),
        goal: GoalSpec {
            x: 5.5,
            y: 0.7,
            tolerance_m: 0.15,
        },
        objects,
        sim: SimSpec {
            dt_s: 0.05,
            max_ticks: 1500,
            perception_period_ticks: 4,
            seed: 0,
        },
        classes: vec![],
    }
}

#[test]
fn empty_corridor_reaches_goal_without_pushing() {
    for mode in [PerceptionMode::Oracle, PerceptionMode::Rendered] {
        let opts = RunOptions {
            perception: mode,
            ..Default::default()
        };
        let out = run_scenario(&corridor(vec![]), &opts).unwrap();
        assert_eq!(out.stop, StopReason::GoalReached, "{mode:?}");
        assert!(out.report.success);
        assert!(out.report.pushes.is_empty());
        assert_eq!(out.safety_violations, 0);
        let last = out.rows.last().unwrap();
        assert!(Point2::new(last.x, last.y).distance(Point2::new(5.5, 0.7)) <= 0.15);
        // Straight run of 5 m at cruise speed.
        assert!((out.report.path_length_m - 4.85).abs() < 0.1, "{}", out.report.path_length_m);
    }
}

#[test]
fn max_ticks_stops_the_run() {
    let opts = RunOptions {
        perception: PerceptionMode::Oracle,
        max_ticks: Some(10),
        ..Default::default()
    };
    let out = run_scenario(&corridor(vec![]), &opts).unwrap();
    assert_eq!(out.stop, StopReason::MaxTicks);
    assert_eq!(out.report.ticks, 10);
    assert_eq!(out.rows.len(), 11);
    assert!(out.rows.last().unwrap().event.ends_with("max_ticks"));
}

#[test]
fn light_box_in_corridor_is_pushed() {
    let boxed = ObjectSpec {
        id: ObjectId(1),
        class: ClassName::BoxCardboard,
        footprint: rectangle(0.4, 1.0),
        pose: Pose2D::new(2.0, 0.7, 0.0),
        mass: 1.0,
        friction: 0.4,
    };
    let mut s = corridor(vec![boxed]);
    // Leave room at the far end for the box.
    s.goal.x = 3.5;
    let out = run_scenario(
        &s,
        &RunOptions {
            perception: PerceptionMode::Oracle,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(out.stop, StopReason::GoalReached);
    assert_eq!(out.report.pushes.len(), 1);
    assert!(out.report.pushes[0].push_distance_m > 1.0);
    assert!(out.rows.iter().any(|r| r.mode == Mode::Push));
    assert!(out.rows.iter().filter(|r| r.mode == Mode::Push).all(|r| r.v <= 0.1));
}

#[test]
fn escape_leaves_fatal_inflation() {
    let geom = GridGeometry::new(20, 10, 0.1, Point2::ORIGIN);
    let mut m = LayeredCostmap::new(geom, 0.25);
    let wall: Vec<_> = (0..10).map(|r| GridIndex::new(5, r)).filter(|c| !(3..=7).contains(&c.row)).collect();
    m.set_static(&wall).unwrap();
    let table = ClassTable::default();
    m.upsert_object(ObjectId(1), table.get(ClassName::VaseGlass), &[GridIndex::new(2, 2)])
        .unwrap();
    m.inflate_and_compose();
    let start = Point2::new(0.25, 0.25);
    assert!(m.cell_at(start).unwrap().1.is_fatal());
    let p = plan_with_escape(m.composed(), start, Point2::new(1.55, 0.25), 0.35, &PlannerConfig::default()).unwrap();
    assert_eq!(p.cells[0], GridIndex::new(2, 2));
    assert!(!m.composed().get(*p.cells.last().unwrap()).is_fatal());
}

#[test]
fn jaccard_examples() {
    let a: BTreeSet<_> = [GridIndex::new(0, 0), GridIndex::new(1, 0)].into();
    let b: BTreeSet<_> = [GridIndex::new(1, 0), GridIndex::new(2, 0)].into();
    assert_eq!(jaccard(&a, &b), 1.0 / 3.0);
    assert_eq!(jaccard(&a, &a), 1.0);
    assert_eq!(jaccard(&BTreeSet::new(), &BTreeSet::new()), 1.0);
}



#[test]
fn escape_never_crosses_an_obstacle() {
    // A fixed block seals a walled corridor. Its gaps to the walls are fatal
    // inflation, which links up with the walls' own inflation strips.
    let geom = GridGeometry::new(20, 7, 0.1, Point2::ORIGIN);
    let mut m = LayeredCostmap::new(geom, 0.25);
    let walls: Vec<_> = (0..20).flat_map(|c| [GridIndex::new(c, 0), GridIndex::new(c, 6)]).collect();
    m.set_static(&walls).unwrap();
    let table = ClassTable::default();
    let block: Vec<_> = (2..=4).map(|r| GridIndex::new(8, r)).collect();
    m.upsert_object(ObjectId(1), table.get(ClassName::VaseGlass), &block).unwrap();
    m.inflate_and_compose();
    let start = Point2::new(0.65, 0.35);
    assert!(m.cell_at(start).unwrap().1.is_fatal());
    let r = plan_with_escape(m.composed(), start, Point2::new(1.75, 0.35), 0.35, &PlannerConfig::default());
    assert!(matches!(r, Err(PlanError::StartBlocked)), "{r:?}");
}
