//! Hand-traced renders of small programs with exact expected output.

use std::sync::Arc;

use linviz_core::engine::{
    compile_canonical, complexity_of, execute, execute_plan, EngineError, RenderOptions,
};
use linviz_core::gallery::gallery_entry;
use linviz_core::program::parse_program;
use linviz_core::scene::{to_text, Instruction};
use linviz_core::table::{Column, DataTable};

fn text(v: &[&str]) -> Column {
    Column::Text(v.iter().map(|s| Some(Arc::from(*s))).collect())
}

fn table(cols: Vec<(&str, Column)>) -> DataTable {
    DataTable::from_columns(cols.into_iter().map(|(n, c)| (n.to_string(), c)).collect()).unwrap()
}

fn unit() -> RenderOptions {
    RenderOptions::with_device(1.0, 1.0)
}

fn rects(ins: &[Instruction]) -> Vec<(f64, f64, f64, f64)> {
    ins.iter()
        .filter_map(|i| match *i {
            Instruction::FillRectangle { x, y, w, h } => Some((x, y, w, h)),
            _ => None,
        })
        .collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-12
}

const NAMES: &str = "Visualization {
  Variable { i = { init = 0; iter = i + 20; } }
  DrawString { Text = $name; X = 0; Y = 1 - i / 640; }
}";

#[test]
fn names_listing_dump_is_exact() {
    let t = table(vec![("name", text(&["john", "mary", "tom"]))]);
    let p = parse_program(NAMES).unwrap();
    let r = execute(&p, &t, &RenderOptions::with_device(640.0, 640.0)).unwrap();
    assert_eq!(
        to_text(&r.representation),
        "drawString(\"john\", 0, 0);\ndrawString(\"mary\", 0, 20);\ndrawString(\"tom\", 0, 40);\n"
    );
    assert!(r.diagnostics.is_empty());
    let c = complexity_of(&r.report);
    assert_eq!(c.k_observed, 1);
    assert!(c.certified_data_linear);
    assert_eq!(r.report.total_accesses, 3);
}

#[test]
fn names_listing_reads_each_row_once_at_any_size() {
    let p = parse_program(NAMES).unwrap();
    for n in [3usize, 100, 10_000] {
        let names: Vec<String> = (0..n).map(|i| format!("n{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let t = table(vec![("name", text(&refs))]);
        let r = execute(&p, &t, &RenderOptions::default()).unwrap();
        assert_eq!(r.report.k_observed, 1);
        assert_eq!(r.report.total_accesses, n as u64);
        assert_eq!(r.report.k_planned, 1);
    }
}

#[test]
fn parallel_histogram_bars_start_at_zero() {
    let p = parse_program(
        "Visualization {
           Sort = $v;
           Variable { i = { init = 0; iter = i + 1 / Length; } }
           FillRectangle { X = i; Y = 0; Height = 1; Width = 1 / Length; }
         }",
    )
    .unwrap();
    let t = table(vec![("v", Column::Numeric(vec![4.0, 1.0, 3.0, 2.0]))]);
    let r = execute(&p, &t, &unit()).unwrap();
    let xs: Vec<f64> = rects(&r.representation.instructions)
        .iter()
        .map(|r| r.0)
        .collect();
    assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75]);
    assert!(!complexity_of(&r.report).certified_data_linear);
    assert_eq!(r.report.sort_passes, 1);
}

#[test]
fn adjusted_widths_follow_weights() {
    let e = gallery_entry("adjusted_parallel_histograms").unwrap();
    let t = table(vec![
        ("Population", Column::Numeric(vec![1.0, 3.0, 4.0])),
        ("Climate", Column::Numeric(vec![1.0, 2.0, 3.0])),
        ("Crime", Column::Numeric(vec![1.0, 2.0, 3.0])),
    ]);
    let r = execute(&e.parse(), &t, &unit()).unwrap();
    // Each row draws its outer bar, then one inner bar per attribute.
    let outer: Vec<_> = rects(&r.representation.instructions)
        .into_iter()
        .step_by(4)
        .collect();
    let expect = [(0.0, 0.125), (0.125, 0.375), (0.5, 0.5)];
    assert_eq!(outer.len(), 3);
    for (got, want) in outer.iter().zip(expect) {
        assert!(
            close(got.0, want.0) && close(got.2, want.1),
            "{got:?} vs {want:?}"
        );
    }
    let c = complexity_of(&r.report);
    assert_eq!(c.k_observed, 2);
    assert!(c.certified_data_linear);
}

#[test]
fn two_file_treemap() {
    let e = gallery_entry("treemap").unwrap();
    let t = table(vec![
        ("Path", text(&["a", "b"])),
        ("FileSize", Column::Numeric(vec![3.0, 1.0])),
    ]);
    let r = execute(&e.parse(), &t, &unit()).unwrap();
    assert_eq!(
        to_text(&r.representation),
        "fillRectangle(0, 0, 0.75, 1);\nfillRectangle(0.75, 0, 0.25, 1);\n"
    );
    assert!(complexity_of(&r.report).certified_data_linear);
}

#[test]
fn groups_sorted_by_inner_sum() {
    let p = parse_program(
        "Visualization {
           Partition = $g {
             Sort { Key = S; Accumulator { S = Sum($v) } }
             Variable { i = { init = 0; iter = i + 1; } }
             DrawString { Text = $g; X = i / 2; Y = 0; }
           }
         }",
    )
    .unwrap();
    // Group "a" sums to 8 and comes first in the table; "b" sums to 4.
    let t = table(vec![
        ("g", text(&["a", "b", "a", "b"])),
        ("v", Column::Numeric(vec![5.0, 1.0, 3.0, 3.0])),
    ]);
    let r = execute(&p, &t, &unit()).unwrap();
    let order: Vec<&str> = r
        .representation
        .instructions
        .iter()
        .filter_map(|i| match i {
            Instruction::DrawString { text, .. } => Some(text.as_str()),
            _ => None,
        })
        .collect();
    assert_eq!(&order[..2], ["b", "a"]);
    assert!(!complexity_of(&r.report).certified_data_linear);
}

#[test]
fn order_must_be_a_permutation() {
    let p = parse_program(
        "Visualization {
           Order { Result = {0, 0, 1} }
           FillRectangle { X = 0; Y = 0; Width = 1; Height = 1; }
         }",
    )
    .unwrap();
    let t = table(vec![("v", Column::Numeric(vec![1.0, 2.0, 3.0]))]);
    match execute(&p, &t, &unit()) {
        Err(EngineError::Order { message, .. }) => {
            assert!(message.contains("repeats index 0"), "{message}")
        }
        other => panic!("expected an order error, got {other:?}"),
    }
    let p = parse_program(
        "Visualization {
           Order { Result = reverse(range(childCount)) }
           Variable { i = { init = 0; iter = i + 1; } }
           DrawString { Text = $v; X = i; Y = 0; }
         }",
    )
    .unwrap();
    let r = execute(&p, &t, &unit()).unwrap();
    let texts: Vec<String> = r
        .representation
        .instructions
        .iter()
        .filter_map(|i| match i {
            Instruction::DrawString { text, .. } => Some(text.clone()),
            _ => None,
        })
        .collect();
    assert_eq!(texts, ["3", "2", "1"]);
}

#[test]
fn plot2d_is_a_single_pass() {
    let e = gallery_entry("plot2d").unwrap();
    let t = e.table(50, 1);
    let plan = compile_canonical(&e.parse(), &t, &RenderOptions::default()).unwrap();
    assert_eq!(plan.passes.len(), 1);
    let r = execute_plan(&plan, &t, &RenderOptions::default()).unwrap();
    assert_eq!(r.report.k_observed, 1);
    assert_eq!(r.report.k_planned, 1);
}

#[test]
fn filtered_rows_are_invisible_downstream() {
    let p = parse_program(
        "Visualization {
           Filter = $v > 1
           Accumulator { S = Sum($v) }
           DrawString { Text = S; X = 0; Y = 0; }
         }",
    )
    .unwrap();
    let t = table(vec![("v", Column::Numeric(vec![1.0, 2.0, 3.0]))]);
    let r = execute(&p, &t, &unit()).unwrap();
    let n = r
        .representation
        .instructions
        .iter()
        .filter(|i| matches!(i, Instruction::DrawString { text, .. } if text == "5"))
        .count();
    assert_eq!(n, 2);
}
