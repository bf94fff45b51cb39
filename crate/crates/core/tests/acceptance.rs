//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Reference values come from oracles
//! written here, independent of the library's own forward model.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use chromalayer::annotate::{annotate_scene, bbox_is_tight, min_bbox, trace_contours, BBox, MaskThreshold};
use chromalayer::compositor::render_scene;
use chromalayer::config::Config;
use chromalayer::dataset;
use chromalayer::derive::{derive_graphic, derive_text, DerivationConfig, GraphicGroup, TextGroup};
use chromalayer::layers::{assign_layers, build_stack_graph, validate_layering, Layering, StackEdge, StackGraph, EdgeSource};
use chromalayer::model::{ElementBitmap, ElementId, ElementMeta, NodeKind, Scene, SceneElement, SceneSource, ZIndex};
use chromalayer::raster::{Bgr, BgrRaster, Bgra, Image, Rect};
use chromalayer::synth::{synth_scene, AlphaMode, Layout, SynthParams, Synthesized};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SCENES: u64 = 100;
const FLOAT_TOL: f64 = 1e-6;
/// 2/255 of full scale: two levels for color, 2/255 for alpha.
const QUANT_TOL_LEVELS: f64 = 2.0;
const MIN_TRUE_ALPHA: f64 = 0.05;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

// ------------------------------------------------------------------ oracles

/// `a * fg + (1 - a) * bg`, channel by channel.
fn over(fg: Bgra, bg: Bgr) -> Bgr {
    let mix = |f: f64, b: f64| fg.a * f + (1.0 - fg.a) * b;
    Bgr { b: mix(fg.b, bg.b), g: mix(fg.g, bg.g), r: mix(fg.r, bg.r) }
}

fn round8(img: BgrRaster) -> BgrRaster {
    img.map(|p| Bgr { b: p.b.clamp(0.0, 255.0).round(), g: p.g.clamp(0.0, 255.0).round(), r: p.r.clamp(0.0, 255.0).round() })
}

fn recolor(p: Bgra, c: Bgr) -> Bgra {
    Bgra { b: c.b, g: c.g, r: c.r, a: p.a }
}

/// Paints elements one by one in painting order.
fn painter(scene: &Scene, order: &[ElementId]) -> BgrRaster {
    let (w, h) = scene.canvas;
    let mut canvas = Image::filled(w, h, scene.page_background);
    for id in order {
        let el = scene.elements.iter().find(|e| e.meta.element_id == *id).unwrap();
        let (ax, ay) = el.bitmap.anchor;
        for y in 0..el.bitmap.bgra.height() {
            for x in 0..el.bitmap.bgra.width() {
                let (cx, cy) = (ax + x as i32, ay + y as i32);
                if cx < 0 || cy < 0 || cx >= w as i32 || cy >= h as i32 {
                    continue;
                }
                let under = canvas.get(cx as u32, cy as u32);
                canvas.set(cx as u32, cy as u32, over(el.bitmap.bgra.get(x, y), under));
            }
        }
    }
    canvas
}

fn graphic_group(el: &SceneElement, quantize: bool) -> GraphicGroup {
    let shot = |bg: Bgr| {
        let img = el.bitmap.bgra.map(|p| over(p, bg));
        if quantize { round8(img) } else { img }
    };
    GraphicGroup {
        element_id: el.meta.element_id,
        blue_bg: shot(Bgr { b: 255.0, g: 0.0, r: 0.0 }),
        green_bg: shot(Bgr { b: 0.0, g: 255.0, r: 0.0 }),
        red_bg: shot(Bgr { b: 0.0, g: 0.0, r: 255.0 }),
        roi: el.bitmap.extent(),
    }
}

fn text_group(el: &SceneElement, backdrop: &BgrRaster, quantize: bool) -> TextGroup {
    let q = |img: BgrRaster| if quantize { round8(img) } else { img };
    let shot = |paint: Option<Bgr>| {
        q(Image::from_fn(backdrop.width(), backdrop.height(), |x, y| {
            let p = el.bitmap.bgra.get(x, y);
            let fg = paint.map_or(p, |c| recolor(p, c));
            over(fg, backdrop.get(x, y))
        }))
    };
    TextGroup {
        element_id: el.meta.element_id,
        raw: shot(None),
        no_fg: q(backdrop.clone()),
        blue_fg: shot(Some(Bgr { b: 255.0, g: 0.0, r: 0.0 })),
        green_fg: shot(Some(Bgr { b: 0.0, g: 255.0, r: 0.0 })),
        red_fg: shot(Some(Bgr { b: 0.0, g: 0.0, r: 255.0 })),
        roi: el.bitmap.extent(),
    }
}

/// Worst errors over pixels whose true alpha is at least `MIN_TRUE_ALPHA`.
#[derive(Default, Clone, Copy)]
struct ErrStats {
    color: f64,
    alpha_levels: f64,
    pixels: u64,
    over_tol: u64,
    worst_color_alpha: f64,
}

impl ErrStats {
    fn add(&mut self, truth: &ElementBitmap, got: &ElementBitmap, tol_levels: f64) {
        for (t, g) in truth.bgra.pixels().iter().zip(got.bgra.pixels()) {
            if t.a < MIN_TRUE_ALPHA {
                continue;
            }
            self.pixels += 1;
            let c = (t.b - g.b).abs().max((t.g - g.g).abs()).max((t.r - g.r).abs());
            let a = (t.a - g.a).abs() * 255.0;
            if c > self.color {
                self.color = c;
                self.worst_color_alpha = t.a;
            }
            self.alpha_levels = self.alpha_levels.max(a);
            if c > tol_levels || a > tol_levels {
                self.over_tol += 1;
            }
        }
    }

    fn within(&self, tol_levels: f64) -> bool {
        self.over_tol == 0 && self.color <= tol_levels && self.alpha_levels <= tol_levels
    }

    fn describe(&self) -> String {
        format!(
            "max color err {:.3e} (at true A={:.3}), max alpha err {:.3e} levels, {}/{} px over tolerance",
            self.color, self.worst_color_alpha, self.alpha_levels, self.over_tol, self.pixels
        )
    }
}

fn scene_params(seed: u64) -> SynthParams {
    SynthParams { seed, element_count: (5, 10), text_fraction: 0.4, ..Default::default() }
}

fn scenes() -> Vec<Synthesized> {
    (0..SCENES).map(|s| synth_scene(&scene_params(1000 + s)).unwrap()).collect()
}

// ------------------------------------------------------------------ criteria

fn graphic_round_trip(scenes: &[Synthesized]) -> Outcome {
    let start = Instant::now();
    let cfg = DerivationConfig::default();
    let (mut float, mut quant) = (ErrStats::default(), ErrStats::default());
    let mut extremes = BTreeSet::new();
    for s in scenes {
        for el in &s.scene.elements {
            for p in el.bitmap.bgra.pixels().iter().filter(|p| p.a > 0.0) {
                for (name, c) in [("white", 255.0), ("black", 0.0)] {
                    if p.b == c && p.g == c && p.r == c {
                        extremes.insert(name);
                    }
                }
                if p.b == 255.0 && p.g == 0.0 && p.r == 0.0 {
                    extremes.insert("blue");
                }
                if p.g == 255.0 && p.b == 0.0 && p.r == 0.0 {
                    extremes.insert("green");
                }
                if p.r == 255.0 && p.b == 0.0 && p.g == 0.0 {
                    extremes.insert("red");
                }
            }
            let got = derive_graphic(&graphic_group(el, false), &cfg).unwrap();
            float.add(&el.bitmap, &got, FLOAT_TOL);
            let got = derive_graphic(&graphic_group(el, true), &cfg).unwrap();
            quant.add(&el.bitmap, &got, QUANT_TOL_LEVELS);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let max_elements = scenes.iter().map(|s| s.scene.elements.len()).max().unwrap_or(0);
    let pass = float.within(FLOAT_TOL) && quant.within(QUANT_TOL_LEVELS) && secs < 60.0 && max_elements <= 20 && extremes.len() == 5;
    Outcome {
        name: "graphic derivation round-trip",
        pass,
        detail: format!(
            "{} scenes (<= {max_elements} elements, extremes {:?}); float: {}; 8-bit: {}; {secs:.1}s",
            scenes.len(),
            extremes,
            float.describe(),
            quant.describe()
        ),
    }
}

fn text_round_trip(scenes: &[Synthesized]) -> Outcome {
    let cfg = DerivationConfig::default();
    let mut per_kind: BTreeMap<&str, (ErrStats, ErrStats)> = BTreeMap::new();
    let singles = [Bgr { b: 255.0, g: 0.0, r: 0.0 }, Bgr { b: 0.0, g: 255.0, r: 0.0 }, Bgr { b: 0.0, g: 0.0, r: 255.0 }];
    for (i, s) in scenes.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7_000 + i as u64);
        for el in &s.scene.elements {
            let (w, h) = el.bitmap.bgra.dimensions();
            let arbitrary = Image::from_fn(w, h, |_, _| Bgr {
                b: rng.random_range(0.0..=255.0),
                g: rng.random_range(0.0..=255.0),
                r: rng.random_range(0.0..=255.0),
            });
            let backdrops = [
                ("white", Image::filled(w, h, Bgr { b: 255.0, g: 255.0, r: 255.0 })),
                ("single-channel", Image::filled(w, h, singles[(i + el.meta.element_id.0 as usize) % 3])),
                ("arbitrary", round8(arbitrary)),
            ];
            for (kind, backdrop) in backdrops {
                let entry = per_kind.entry(kind).or_default();
                let got = derive_text(&text_group(el, &backdrop, false), &cfg).unwrap();
                entry.0.add(&el.bitmap, &got, FLOAT_TOL);
                let got = derive_text(&text_group(el, &backdrop, true), &cfg).unwrap();
                entry.1.add(&el.bitmap, &got, QUANT_TOL_LEVELS);
            }
        }
    }
    let pass = per_kind.values().all(|(f, q)| f.within(FLOAT_TOL) && q.within(QUANT_TOL_LEVELS));
    let detail = per_kind
        .iter()
        .map(|(k, (f, q))| format!("[{k}] float: {}; 8-bit: {}", f.describe(), q.describe()))
        .collect::<Vec<_>>()
        .join(" | ");
    Outcome { name: "text derivation round-trip", pass, detail }
}

/// Smallest k admitting a layer assignment with `layer(u) < layer(v)` on
/// every edge and distinct layers on every conflicting pair, by exhaustive search.
fn exhaustive_min_k(n: usize, edges: &[(usize, usize)], conflicts: &[(usize, usize)]) -> usize {
    fn place(i: usize, n: usize, k: usize, layer: &mut Vec<usize>, edges: &[(usize, usize)], conflicts: &[(usize, usize)]) -> bool {
        if i == n {
            return true;
        }
        for l in 1..=k {
            layer[i] = l;
            let ok = edges.iter().all(|&(u, v)| u.max(v) != i || layer[u] < layer[v])
                && conflicts.iter().all(|&(u, v)| u.max(v) != i || layer[u] != layer[v]);
            if ok && place(i + 1, n, k, layer, edges, conflicts) {
                return true;
            }
        }
        false
    }
    if n == 0 {
        return 0;
    }
    (1..=n).find(|&k| place(0, n, k, &mut vec![0; n], edges, conflicts)).expect("k = n always works for a DAG")
}

fn layering_respects(layering: &Layering, n: usize, edges: &[(usize, usize)]) -> bool {
    let of = layering.layer_of();
    let all: BTreeSet<u32> = layering.iter_ids().map(|i| i.0).collect();
    all.len() == n
        && layering.iter_ids().count() == n
        && layering.layers().iter().all(|l| !l.is_empty())
        && edges.iter().all(|&(u, v)| of[&ElementId(u as u32)] < of[&ElementId(v as u32)])
}

fn opaque_rect(id: u32, rect: Rect, xpath: String, z: ZIndex, doc_order: u32) -> SceneElement {
    SceneElement {
        meta: ElementMeta { element_id: ElementId(id), xpath, z_index: z, rect, kind: NodeKind::Graphic, doc_order, computed_style: BTreeMap::new() },
        bitmap: ElementBitmap { element_id: ElementId(id), bgra: Image::filled(rect.w, rect.h, Bgra { b: 1.0, g: 2.0, r: 3.0, a: 1.0 }), anchor: (rect.x, rect.y) },
    }
}

fn mcl_correctness() -> Outcome {
    let (mut cases, mut failures) = (0u64, Vec::new());

    // Every labelled DAG on up to five vertices.
    for n in 1..=5usize {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        for code in 0..3usize.pow(pairs.len() as u32) {
            let mut c = code;
            let mut edges = Vec::new();
            for &(i, j) in &pairs {
                match c % 3 {
                    1 => edges.push((i, j)),
                    2 => edges.push((j, i)),
                    _ => {}
                }
                c /= 3;
            }
            let graph = StackGraph::from_edges(
                (0..n as u32).map(ElementId).collect(),
                edges.iter().map(|&(u, v)| StackEdge { below: ElementId(u as u32), above: ElementId(v as u32), source: EdgeSource::ZIndex }).collect(),
            );
            if graph.find_cycle().is_some() {
                continue;
            }
            cases += 1;
            let layering = assign_layers(&graph).unwrap();
            let want = exhaustive_min_k(n, &edges, &edges);
            if !layering_respects(&layering, n, &edges) || layering.k() != want {
                failures.push(format!("dag n={n} code={code}: k={} want {want}", layering.k()));
            }
        }
    }

    // Stack graphs of random overlap patterns on up to eight elements.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..5000 {
        let n = rng.random_range(1..=8usize);
        let mut order: Vec<u32> = (0..n as u32).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let mut elements: Vec<SceneElement> = Vec::new();
        for i in 0..n {
            let (w, h) = (rng.random_range(1..=8), rng.random_range(1..=8));
            let rect = Rect::new(rng.random_range(0..=12 - w as i32), rng.random_range(0..=12 - h as i32), w, h);
            let z = if rng.random_bool(0.4) { ZIndex::Numeric(rng.random_range(-1..3)) } else { ZIndex::auto() };
            let xpath = if i > 0 && rng.random_bool(0.25) {
                let parent = rng.random_range(0..i);
                format!("{}/div[{}]", elements[parent].meta.xpath, i + 1)
            } else {
                format!("/html/body/div[{}]", i + 1)
            };
            elements.push(opaque_rect(i as u32, rect, xpath, z, order[i]));
        }
        let scene = Scene { canvas: (12, 12), page_background: Bgr { b: 255.0, g: 255.0, r: 255.0 }, elements, source: SceneSource::Synthetic };
        let mut graph = build_stack_graph(&scene);
        graph.break_cycles();
        let layering = match assign_layers(&graph) {
            Ok(l) => l,
            Err(e) => {
                failures.push(format!("overlap case {case}: {e}"));
                continue;
            }
        };
        cases += 1;
        let report = validate_layering(&scene, &graph, &layering);
        let edges: Vec<(usize, usize)> = graph.edges.iter().map(|e| (e.below.0 as usize, e.above.0 as usize)).collect();
        let conflicts: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| scene.elements[i].meta.rect.intersect(&scene.elements[j].meta.rect).is_some())
            .collect();
        let want = exhaustive_min_k(n, &edges, &conflicts);
        if !report.is_ok() || layering.k() != want {
            failures.push(format!("overlap case {case}: k={} want {want}, report ok={}", layering.k(), report.is_ok()));
        }
    }
    Outcome {
        name: "minimum composition layering",
        pass: failures.is_empty(),
        detail: format!("{} of {cases} cases optimal and valid{}", cases - failures.len() as u64, failures.first().map(|f| format!("; first failure: {f}")).unwrap_or_default()),
    }
}

fn max_diff(a: &BgrRaster, b: &BgrRaster) -> f64 {
    a.pixels()
        .iter()
        .zip(b.pixels())
        .map(|(p, q)| (p.b - q.b).abs().max((p.g - q.g).abs()).max((p.r - q.r).abs()))
        .fold(0.0, f64::max)
}

fn quantize_bitmaps(scene: &Scene) -> Scene {
    let q = |v: f64| v.clamp(0.0, 255.0).round();
    let elements = scene
        .elements
        .iter()
        .map(|el| {
            let bgra = el.bitmap.bgra.map(|p| Bgra { b: q(p.b), g: q(p.g), r: q(p.r), a: q(p.a * 255.0) / 255.0 });
            SceneElement { meta: el.meta.clone(), bitmap: ElementBitmap { bgra, ..el.bitmap.clone() } }
        })
        .collect();
    Scene { elements, ..scene.clone() }
}

fn recovered_render(scene: &Scene) -> BgrRaster {
    let mut graph = build_stack_graph(scene);
    graph.break_cycles();
    let layering = assign_layers(&graph).unwrap();
    render_scene(scene, &layering, None).unwrap()
}

/// Scene rebuilt from simulated captures of every element: graphics alone
/// over the three key colors, text alone over the page background.
fn derived_scene(s: &Synthesized, quantize: bool) -> Scene {
    let cfg = DerivationConfig::default();
    let elements = s
        .scene
        .elements
        .iter()
        .map(|el| {
            let bitmap = match el.meta.kind {
                NodeKind::Graphic => derive_graphic(&graphic_group(el, quantize), &cfg).unwrap(),
                NodeKind::Text => {
                    let (w, h) = el.bitmap.bgra.dimensions();
                    derive_text(&text_group(el, &Image::filled(w, h, s.scene.page_background), quantize), &cfg).unwrap()
                }
            };
            SceneElement { meta: el.meta.clone(), bitmap }
        })
        .collect();
    Scene { elements, ..s.scene.clone() }
}

fn recomposition_fidelity(scenes: &[Synthesized]) -> Outcome {
    let (mut exact, mut worst8, mut over8) = (0usize, 0.0f64, 0usize);
    let (mut derived_float, mut derived8) = (0.0f64, 0.0f64);
    for s in scenes {
        let original = painter(&s.scene, &s.paint_order);
        let original8 = round8(original.clone());
        if max_diff(&recovered_render(&s.scene), &original) == 0.0 {
            exact += 1;
        }
        let d = max_diff(&round8(recovered_render(&quantize_bitmaps(&s.scene))), &original8);
        worst8 = worst8.max(d);
        if d > 1.0 {
            over8 += 1;
        }
        derived_float = derived_float.max(max_diff(&recovered_render(&derived_scene(s, false)), &original));
        derived8 = derived8.max(max_diff(&round8(recovered_render(&derived_scene(s, true))), &original8));
    }
    let pass = exact == scenes.len() && over8 == 0;
    Outcome {
        name: "recomposition fidelity",
        pass,
        detail: format!(
            "float: {exact}/{} scenes bit-exact; 8-bit bitmaps: max diff {worst8} levels, {over8} scenes over 1 level; \
             (info) from derived bitmaps: float max diff {derived_float:.3e}, 8-bit captures max diff {derived8} levels",
            scenes.len()
        ),
    }
}

fn mask_oracle() -> Outcome {
    let (mut checked, mut rect_checked) = (0usize, 0usize);
    let mut problems = Vec::new();
    for seed in 0..SCENES {
        let params = SynthParams { seed: 5000 + seed, alpha_mode: AlphaMode::Opaque, element_count: (4, 16), ..Default::default() };
        let s = synth_scene(&params).unwrap();
        let ann = annotate_scene(&s.scene, &s.layering, MaskThreshold::Float).unwrap();
        let (w, h) = s.scene.canvas;
        for (pos, id) in s.paint_order.iter().enumerate() {
            let el = s.scene.element(*id).unwrap();
            let above: Vec<&SceneElement> = s.paint_order[pos + 1..].iter().map(|i| s.scene.element(*i).unwrap()).collect();
            let a = ann.get(*id).unwrap();
            checked += 1;
            for y in 0..h {
                for x in 0..w {
                    let (xi, yi) = (x as i64, y as i64);
                    let visible = el.bitmap.alpha_at(xi, yi) > 0.0 && above.iter().all(|o| o.bitmap.alpha_at(xi, yi) < 1.0);
                    if visible != a.mask.bits.get(x, y) {
                        problems.push(format!("seed {seed} {id} pixel ({x},{y})"));
                    }
                }
            }
            let set: Vec<(u32, u32)> = a.mask.bits.iter_set().collect();
            let oracle_box = if set.is_empty() {
                BBox::Empty
            } else {
                let x0 = set.iter().map(|p| p.0).min().unwrap();
                let x1 = set.iter().map(|p| p.0).max().unwrap();
                let y0 = set.iter().map(|p| p.1).min().unwrap();
                let y1 = set.iter().map(|p| p.1).max().unwrap();
                BBox::Rect { x: x0, y: y0, w: x1 - x0 + 1, h: y1 - y0 + 1 }
            };
            if a.bbox != oracle_box || !bbox_is_tight(&a.mask.bits, &a.bbox) {
                problems.push(format!("seed {seed} {id} bbox {:?} vs {oracle_box:?}", a.bbox));
            }
        }
    }
    for seed in 0..SCENES {
        let params = SynthParams {
            seed: 6000 + seed,
            alpha_mode: AlphaMode::Opaque,
            layout: Layout::Disjoint,
            ellipse_fraction: 0.0,
            text_fraction: 0.0,
            nesting: 0.0,
            element_count: (1, 12),
            ..Default::default()
        };
        let s = synth_scene(&params).unwrap();
        let ann = annotate_scene(&s.scene, &s.layering, MaskThreshold::Float).unwrap();
        for el in &s.scene.elements {
            let a = ann.get(el.meta.element_id).unwrap();
            let contours = trace_contours(&a.mask);
            let Rect { w, h, .. } = el.meta.rect;
            rect_checked += 1;
            let want = if w >= 2 && h >= 2 { (2 * w + 2 * h - 4) as usize } else { (w * h) as usize };
            if contours.len() != 1 || contours[0].points.len() != want || min_bbox(&a.mask) != (BBox::Rect { x: el.meta.rect.x as u32, y: el.meta.rect.y as u32, w, h }) {
                problems.push(format!("rect seed {seed} {}: {} contours", el.meta.element_id, contours.len()));
            }
        }
    }
    Outcome {
        name: "mask/contour/bbox oracle equivalence",
        pass: problems.is_empty(),
        detail: format!(
            "{checked} masks vs topmost-visibility scan, {rect_checked} rectangle contours; {} mismatches{}",
            problems.len(),
            problems.first().map(|p| format!(" (first: {p})")).unwrap_or_default()
        ),
    }
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let config = Config::default();
    let run = |root: &Path| {
        for seed in [7u64, 8, 9] {
            let dir = root.join(dataset::sample_dir_name(seed as usize, &format!("synth:{seed}")));
            dataset::synth_sample(&dir, &SynthParams { seed, ..Default::default() }, &config).unwrap();
            dataset::derive_stage(&dir, &config.derivation).unwrap();
            dataset::layerize_stage(&dir).unwrap();
            dataset::export_stage(&dir, &dataset::sample_info(&dir, &config.hash())).unwrap();
        }
        tree(root)
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ta, tb) = (run(a.path()), run(b.path()));
    let differing: Vec<&PathBuf> = ta.keys().filter(|k| ta.get(*k) != tb.get(*k)).collect();
    let pass = ta.keys().eq(tb.keys()) && differing.is_empty() && !ta.is_empty();
    Outcome {
        name: "pipeline determinism",
        pass,
        detail: format!("{} files per tree, {} differ", ta.len(), differing.len()),
    }
}

fn main() {
    let scenes = scenes();
    let outcomes = [
        graphic_round_trip(&scenes),
        text_round_trip(&scenes),
        mcl_correctness(),
        recomposition_fidelity(&scenes),
        mask_oracle(),
        determinism(),
    ];
    for o in &outcomes {
        println!("{} {}: {}", if o.pass { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
