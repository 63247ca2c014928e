//! Whole-gallery properties: driver equivalence, cache neutrality,
//! certificates and treemap geometry.

use std::collections::HashMap;

use linviz_core::engine::{
    compile_canonical, complexity_of, execute, execute_plan, worst_aspect, RenderOptions,
};
use linviz_core::gallery::{gallery_entry, list_gallery, synth_filetree};
use linviz_core::scene::{to_text, Instruction, Rect};
use linviz_core::table::{DataTable, Value};

fn opts() -> RenderOptions {
    RenderOptions::default()
}

#[test]
fn entries_render_cleanly_under_both_drivers() {
    for e in list_gallery() {
        let t = e.default_table();
        let p = e.parse();
        let direct = execute(&p, &t, &opts()).unwrap();
        assert!(
            direct.diagnostics.is_empty(),
            "{}: {:?}",
            e.name,
            direct.diagnostics
        );
        assert!(direct.representation.geometric_count() > 0, "{}", e.name);
        let plan = compile_canonical(&p, &t, &opts()).unwrap();
        let planned = execute_plan(&plan, &t, &opts()).unwrap();
        assert_eq!(
            to_text(&direct.representation),
            to_text(&planned.representation),
            "{}",
            e.name
        );
        assert_eq!(direct.report, planned.report, "{}", e.name);
        assert_eq!(
            complexity_of(&direct.report).certified_data_linear,
            e.certified,
            "{}",
            e.name
        );
    }
}

#[test]
fn drivers_agree_across_seeds() {
    for e in list_gallery() {
        let p = e.parse();
        for seed in 0..4 {
            for n in [10, 100] {
                let t = e.table(n, seed);
                let a = execute(&p, &t, &opts()).unwrap();
                let plan = compile_canonical(&p, &t, &opts()).unwrap();
                let b = execute_plan(&plan, &t, &opts()).unwrap();
                assert_eq!(
                    to_text(&a.representation),
                    to_text(&b.representation),
                    "{} seed {seed} n {n}",
                    e.name
                );
            }
        }
    }
}

#[test]
fn plans_reject_other_tables() {
    let e = gallery_entry("treemap").unwrap();
    let plan = compile_canonical(&e.parse(), &e.table(50, 1), &opts()).unwrap();
    assert!(execute_plan(&plan, &e.table(60, 1), &opts()).is_err());
}

#[test]
fn caching_never_changes_output() {
    let off = RenderOptions {
        cache: false,
        ..opts()
    };
    for e in list_gallery() {
        let t = e.table(120, 5);
        let p = e.parse();
        let a = execute(&p, &t, &opts()).unwrap();
        let b = execute(&p, &t, &off).unwrap();
        assert_eq!(
            to_text(&a.representation),
            to_text(&b.representation),
            "{}",
            e.name
        );
    }
}

#[test]
fn sort_free_entries_have_size_independent_bounds() {
    for e in list_gallery().into_iter().filter(|e| e.certified) {
        let p = e.parse();
        let mut planned = Vec::new();
        for n in [100, 1000, 10_000] {
            let r = execute(&p, &e.table(n, 2), &opts()).unwrap();
            assert!(
                r.report.k_observed <= r.report.k_planned,
                "{} n {n}",
                e.name
            );
            assert_eq!(r.report.sort_passes, 0, "{}", e.name);
            planned.push(r.report.k_planned);
        }
        assert!(
            planned.windows(2).all(|w| w[0] == w[1]),
            "{}: {planned:?}",
            e.name
        );
    }
}

/// File tree rebuilt from the table: children in first-appearance order.
struct Tree {
    children: Vec<Vec<usize>>,
    weight: Vec<f64>,
    depth: Vec<usize>,
}

fn build_tree(t: &DataTable) -> Tree {
    let (pc, sc) = (
        t.column_index("Path").unwrap(),
        t.column_index("FileSize").unwrap(),
    );
    let mut tree = Tree {
        children: vec![Vec::new()],
        weight: vec![0.0],
        depth: vec![0],
    };
    let mut ids: HashMap<String, usize> = HashMap::new();
    for r in 0..t.len() {
        let Value::Text(path) = t.value(r, pc) else {
            panic!()
        };
        let w = t.value(r, sc).as_number();
        let mut node = 0;
        tree.weight[0] += w;
        let mut prefix = String::new();
        for seg in path.split('/') {
            prefix.push('/');
            prefix.push_str(seg);
            let next = match ids.get(&prefix) {
                Some(&id) => id,
                None => {
                    let id = tree.children.len();
                    tree.children.push(Vec::new());
                    tree.weight.push(0.0);
                    tree.depth.push(tree.depth[node] + 1);
                    tree.children[node].push(id);
                    ids.insert(prefix.clone(), id);
                    id
                }
            };
            tree.weight[next] += w;
            node = next;
        }
    }
    tree
}

/// Assigns drawn rectangles to tree nodes in emission order: a scope draws
/// all of its children, then descends into each of them. Squarified scopes
/// visit children by descending weight.
fn assign(
    tree: &Tree,
    node: usize,
    by_weight: bool,
    rects: &mut std::slice::Iter<'_, Rect>,
    out: &mut [Option<Rect>],
) {
    let mut kids = tree.children[node].clone();
    if by_weight {
        kids.sort_by(|&a, &b| tree.weight[b].total_cmp(&tree.weight[a]));
    }
    for &c in &kids {
        out[c] = Some(*rects.next().expect("one rectangle per node"));
    }
    for &c in &kids {
        assign(tree, c, by_weight, rects, out);
    }
}

fn device_rects(ins: &[Instruction]) -> Vec<Rect> {
    ins.iter()
        .filter_map(|i| match *i {
            Instruction::FillRectangle { x, y, w, h } => Some(Rect::new(x, y, w, h)),
            _ => None,
        })
        .collect()
}

fn node_rects(name: &str, t: &DataTable, tree: &Tree) -> Vec<Rect> {
    let e = gallery_entry(name).unwrap();
    let r = execute(&e.parse(), t, &opts()).unwrap();
    assert!(r.diagnostics.is_empty());
    let drawn = device_rects(&r.representation.instructions);
    let mut out = vec![None; tree.children.len()];
    out[0] = Some(Rect::new(
        0.0,
        0.0,
        opts().device.width,
        opts().device.height,
    ));
    let mut it = drawn.iter();
    assign(tree, 0, name == "squarified_treemap", &mut it, &mut out);
    assert!(it.next().is_none(), "extra rectangles");
    out.into_iter().map(|r| r.unwrap()).collect()
}

fn disjoint(a: &Rect, b: &Rect) -> bool {
    let ox = (a.x + a.width).min(b.x + b.width) - a.x.max(b.x);
    let oy = (a.y + a.height).min(b.y + b.height) - a.y.max(b.y);
    ox <= 1e-9 || oy <= 1e-9
}

#[test]
fn treemap_tiles_every_node() {
    for seed in [0, 1] {
        let t = synth_filetree(10_000, seed, 4);
        let tree = build_tree(&t);
        let rects = node_rects("treemap", &t, &tree);
        for (node, kids) in tree.children.iter().enumerate() {
            if kids.is_empty() {
                continue;
            }
            let parent = rects[node];
            // Even depths split along x, odd depths along y.
            let horizontal = tree.depth[node] % 2 == 1;
            let along = |r: &Rect| if horizontal { r.height } else { r.width };
            let across = |r: &Rect| if horizontal { r.width } else { r.height };
            let sum: f64 = kids.iter().map(|&c| along(&rects[c])).sum();
            assert!(
                (sum - along(&parent)).abs() <= 1e-9,
                "node {node}: {sum} vs {}",
                along(&parent)
            );
            for (i, &a) in kids.iter().enumerate() {
                assert!((across(&rects[a]) - across(&parent)).abs() <= 1e-9);
                let share = along(&rects[a]) / along(&parent);
                assert!((share - tree.weight[a] / tree.weight[node]).abs() <= 1e-9);
                for &b in &kids[i + 1..] {
                    assert!(
                        disjoint(&rects[a], &rects[b]),
                        "{:?} {:?}",
                        rects[a],
                        rects[b]
                    );
                }
            }
        }
    }
}

#[test]
fn squarified_tiles_are_no_thinner() {
    for seed in 0..10 {
        let t = synth_filetree(300, seed, 2);
        let tree = build_tree(&t);
        let slice = node_rects("treemap", &t, &tree);
        let square = node_rects("squarified_treemap", &t, &tree);
        for (node, kids) in tree.children.iter().enumerate() {
            for (i, &a) in kids.iter().enumerate() {
                let ra = square[a];
                let p = square[node];
                assert!(ra.x >= p.x - 1e-9 && ra.x + ra.width <= p.x + p.width + 1e-9);
                assert!(ra.y >= p.y - 1e-9 && ra.y + ra.height <= p.y + p.height + 1e-9);
                let area = ra.width * ra.height / (p.width * p.height);
                assert!((area - tree.weight[a] / tree.weight[node]).abs() <= 1e-9);
                for &b in &kids[i + 1..] {
                    assert!(disjoint(&square[a], &square[b]));
                }
            }
        }
        let (ws, wq) = (worst_aspect(&slice[1..]), worst_aspect(&square[1..]));
        assert!(
            wq <= ws,
            "seed {seed}: squarified {wq} vs slice-and-dice {ws}"
        );
    }
}
