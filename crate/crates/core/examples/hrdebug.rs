use braidplan::map::{Cell, GridMap, Instance};
use braidplan::planner::{hrpp, PlannerConfig};
use braidplan::jointbfs::enumerate_classes;

fn main() {
    let map = GridMap::empty(6, 6);
    let instance = Instance {
        starts: vec![Cell::new(0, 0), Cell::new(5, 5)],
        goals: vec![Cell::new(0, 5), Cell::new(5, 0)],
    };
    let out = hrpp(&map, &instance, &PlannerConfig { k: 6, ..Default::default() }).unwrap();
    for p in &out.plans {
        println!("cost={} word={} state={:?}", p.cost, p.braid_word, p.braid_state.as_ref().map(|s| s.serialize()));
    }
    println!("warnings: {:?}", out.warnings);
    let classes = enumerate_classes(&map, &instance, 12, 20_000_000).unwrap();
    for c in classes {
        println!("oracle class: word={} cost={} makespan={}", c.word, c.cost, c.makespan);
    }
}
