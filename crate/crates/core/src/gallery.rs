//! Built-in example programs and the seeded tables they run on.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::program::{expand_macro, parse_program, MacroArg, VizProgram};
use crate::table::{Column, DataTable};

/// The ten state symbols cities are drawn from.
pub const STATES: [&str; 10] = ["CA", "NY", "TX", "FL", "IL", "PA", "OH", "GA", "NC", "MI"];

pub const CITY_ATTRIBUTES: [&str; 8] = [
    "name",
    "State",
    "Population",
    "Crime",
    "HousingCost",
    "Climate",
    "Latitude",
    "Longitude",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dataset {
    Cities,
    FileTree { max_depth: usize },
}

impl Dataset {
    pub fn generate(self, n: usize, seed: u64) -> DataTable {
        match self {
            Dataset::Cities => synth_cities(n, seed),
            Dataset::FileTree { max_depth } => synth_filetree(n, seed, max_depth),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dataset::Cities => "cities",
            Dataset::FileTree { .. } => "filetree",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalleryEntry {
    pub name: &'static str,
    pub title: &'static str,
    pub program: String,
    pub dataset: Dataset,
    /// Whether renders of this entry certify data-linearity.
    pub certified: bool,
}

/// Default size and seed of every entry's dataset.
pub const DEFAULT_ROWS: usize = 200;
pub const DEFAULT_SEED: u64 = 1;
/// Path depth of the default file tree.
pub const FILETREE_DEPTH: usize = 4;

impl GalleryEntry {
    pub fn parse(&self) -> VizProgram {
        parse_program(&self.program).expect("gallery programs parse")
    }

    pub fn table(&self, n: usize, seed: u64) -> DataTable {
        self.dataset.generate(n, seed)
    }

    pub fn default_table(&self) -> DataTable {
        self.table(DEFAULT_ROWS, DEFAULT_SEED)
    }
}

fn expand(name: &str, args: &[(&str, &str)]) -> String {
    let map: BTreeMap<String, MacroArg> = args
        .iter()
        .map(|(k, v)| (k.to_string(), MacroArg::parse(v)))
        .collect();
    expand_macro(name, &map)
        .expect("gallery macro arguments are valid")
        .source
}

const NAMES: &str = "Visualization {
  Variable {
    i = { init = 0; iter = i + 20; }
  }
  DrawString {
    Text = $name;
    X = 0;
    Y = 1 - i / 640;
  }
}
";

const HIGHLIGHT: &str = "Visualization {
  FillEllipse {
    X = $Longitude with center;
    Y = $Latitude with center;
    Width = .04;
    Height = .04;
    Paint {
      hue = .75;
      saturation = .5;
      value = $Population > 1M ? 1 : 0;
    }
  }
}
";

const EMBEDDED_BARS: &str = "Visualization {
  FillRectangle {
    X = norm($Longitude) * .95;
    Y = norm($Latitude) * .95;
    Width = .05;
    Height = .05;
    FillRectangle { X = 0; Y = 0; Width = .5; Height = $Crime; }
    FillRectangle { X = .5; Y = 0; Width = .5; Height = $Climate; }
  }
}
";

const STATE_GROUPING: &str = "Visualization {
  Partition = $State {
    Accumulator {
      MinX = Minimum($Longitude / recordCount);
      MaxX = Maximum($Longitude / recordCount);
      MinY = Minimum($Latitude / recordCount);
      MaxY = Maximum($Latitude / recordCount);
    }
    FillRectangle {
      X = .9 * ($Longitude / recordCount - MinX) / (MaxX - MinX);
      Y = .9 * ($Latitude / recordCount - MinY) / (MaxY - MinY);
      Width = .1;
      Height = .1;
    }
  }
}
";

pub fn list_gallery() -> Vec<GalleryEntry> {
    let cities = Dataset::Cities;
    let files = Dataset::FileTree {
        max_depth: FILETREE_DEPTH,
    };
    let e = |name, title, program: String, dataset, certified| GalleryEntry {
        name,
        title,
        program,
        dataset,
        certified,
    };
    vec![
        e(
            "names",
            "Names one below the other",
            NAMES.to_string(),
            cities,
            true,
        ),
        e(
            "plot2d",
            "Scatter plot of longitude and latitude",
            expand("plot2d", &[("x", "Longitude"), ("y", "Latitude")]),
            cities,
            true,
        ),
        e(
            "highlight",
            "Scatter plot with large cities highlighted",
            HIGHLIGHT.to_string(),
            cities,
            true,
        ),
        e(
            "embedded_bars",
            "Small bar charts placed by location",
            EMBEDDED_BARS.to_string(),
            cities,
            true,
        ),
        e(
            "parallel_histograms",
            "Parallel histograms sorted by population",
            expand(
                "parallel_histograms",
                &[("attrs", "Population,Climate,Crime")],
            ),
            cities,
            false,
        ),
        e(
            "adjusted_parallel_histograms",
            "Parallel histograms with population-proportional widths",
            expand(
                "adjusted_parallel_histograms",
                &[
                    ("weight", "Population"),
                    ("attrs", "Population,Climate,Crime"),
                ],
            ),
            cities,
            true,
        ),
        e(
            "state_grouping",
            "States placed at their mean location",
            STATE_GROUPING.to_string(),
            cities,
            true,
        ),
        e(
            "grid_of",
            "Grid of per-state plots with a special case",
            expand(
                "grid_of",
                &[
                    ("key", "State"),
                    ("x", "HousingCost"),
                    ("y", "Climate"),
                    ("special", "CA"),
                ],
            ),
            cities,
            true,
        ),
        e(
            "treemap",
            "Slice-and-dice treemap of a file tree",
            expand("treemap", &[("path", "Path"), ("weight", "FileSize")]),
            files,
            true,
        ),
        e(
            "squarified_treemap",
            "Squarified treemap of a file tree",
            expand(
                "squarified_treemap",
                &[("path", "Path"), ("weight", "FileSize")],
            ),
            files,
            false,
        ),
        e(
            "parallel_coordinates",
            "Parallel coordinates",
            expand(
                "parallel_coordinates",
                &[("attrs", "Population,Crime,HousingCost,Climate")],
            ),
            cities,
            true,
        ),
    ]
}

pub fn gallery_entry(name: &str) -> Option<GalleryEntry> {
    list_gallery().into_iter().find(|e| e.name == name)
}

fn round_to(v: f64, digits: i32) -> f64 {
    let s = 10f64.powi(digits);
    (v * s).round() / s
}

fn text(v: Vec<String>) -> Column {
    Column::Text(v.into_iter().map(|s| Some(Arc::from(s.as_str()))).collect())
}

/// Seeded city statistics with the eight city attributes.
pub fn synth_cities(n: usize, seed: u64) -> DataTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: [Vec<f64>; 6] = Default::default();
    let mut names = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    for i in 0..n {
        names.push(format!("City{i}"));
        states.push(STATES[rng.random_range(0..STATES.len())].to_string());
        // Log-uniform between 1k and 10M so both sides of 1M occur.
        cols[0].push(10f64.powf(rng.random_range(3.0..7.0)).round());
        cols[1].push(round_to(rng.random_range(0.0..100.0), 2));
        cols[2].push(round_to(rng.random_range(50_000.0..1_000_000.0), 0));
        cols[3].push(round_to(rng.random_range(0.0..100.0), 2));
        cols[4].push(round_to(rng.random_range(25.0..49.0), 4));
        cols[5].push(round_to(rng.random_range(-124.0..-67.0), 4));
    }
    let [pop, crime, housing, climate, lat, long] = cols;
    DataTable::from_columns(vec![
        ("name".into(), text(names)),
        ("State".into(), text(states)),
        ("Population".into(), Column::Numeric(pop)),
        ("Crime".into(), Column::Numeric(crime)),
        ("HousingCost".into(), Column::Numeric(housing)),
        ("Climate".into(), Column::Numeric(climate)),
        ("Latitude".into(), Column::Numeric(lat)),
        ("Longitude".into(), Column::Numeric(long)),
    ])
    .expect("generated columns are consistent")
}

/// Directory names per level.
const BRANCHING: usize = 4;

/// Seeded file listing: unique `/`-separated paths of at most `max_depth`
/// segments and positive sizes. The first two files share a directory at
/// the deepest level, so the tree always reaches `max_depth`.
pub fn synth_filetree(n: usize, seed: u64, max_depth: usize) -> DataTable {
    let max_depth = max_depth.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut paths = Vec::with_capacity(n);
    let mut sizes = Vec::with_capacity(n);
    for i in 0..n {
        let dirs = if i < 2 {
            max_depth - 1
        } else {
            rng.random_range(0..max_depth)
        };
        let mut segs: Vec<String> = (0..dirs)
            .map(|_| {
                let d = if i < 2 {
                    0
                } else {
                    rng.random_range(0..BRANCHING)
                };
                format!("d{d}")
            })
            .collect();
        segs.push(format!("f{i}"));
        paths.push(segs.join("/"));
        sizes.push(10f64.powf(rng.random_range(0.0..6.0)).ceil());
    }
    DataTable::from_columns(vec![
        ("Path".into(), text(paths)),
        ("FileSize".into(), Column::Numeric(sizes)),
    ])
    .expect("generated columns are consistent")
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::program::validate;
    use crate::table::{AttrType, Value};

    #[test]
    fn cities_are_deterministic_and_typed() {
        let a = synth_cities(100, 1);
        assert_eq!(a.to_csv().unwrap(), synth_cities(100, 1).to_csv().unwrap());
        assert_ne!(a.to_csv().unwrap(), synth_cities(100, 2).to_csv().unwrap());
        let names: Vec<&str> = a
            .schema()
            .attributes()
            .iter()
            .map(|x| x.name.as_str())
            .collect();
        assert_eq!(names, CITY_ATTRIBUTES);
        assert_eq!(a.schema().type_of("Population"), Some(AttrType::Numeric));
        let state = a.column_index("State").unwrap();
        for r in 0..a.len() {
            let Value::Text(s) = a.value(r, state) else {
                panic!()
            };
            assert!(STATES.contains(&&*s));
        }
    }

    #[test]
    fn filetree_paths_are_unique_and_bounded() {
        let t = synth_filetree(4, 0, 3);
        assert_eq!(t.len(), 4);
        let mut seen = HashSet::new();
        let t = synth_filetree(500, 7, 4);
        let (p, s) = (
            t.column_index("Path").unwrap(),
            t.column_index("FileSize").unwrap(),
        );
        let mut deepest = 0;
        for r in 0..t.len() {
            let Value::Text(path) = t.value(r, p) else {
                panic!()
            };
            let depth = path.split('/').count();
            assert!(depth <= 4);
            deepest = deepest.max(depth);
            assert!(seen.insert(path.to_string()));
            assert!(t.value(r, s).as_number() > 0.0);
        }
        assert_eq!(deepest, 4);
    }

    #[test]
    fn every_entry_validates_against_its_dataset() {
        let entries = list_gallery();
        assert!(entries.len() >= 10);
        for e in &entries {
            let t = e.table(20, 3);
            let d = validate(&e.parse(), t.schema());
            assert!(d.is_empty(), "{}: {d:?}", e.name);
        }
        assert!(gallery_entry("treemap").is_some());
        assert!(gallery_entry("nope").is_none());
    }
}
