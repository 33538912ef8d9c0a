//! Refines a 2x2 macro mesh once and summarises the facet classification.
use powerlaw_fem::mesh::{red_refine, FacetKind};
use powerlaw_fem::MacroMesh;

fn main() -> powerlaw_fem::Result<()> {
    let macro_mesh = MacroMesh::unit_square(2)?;
    let fine = red_refine(&macro_mesh)?;
    println!(
        "macro: {} elements, fine: {} nodes, {} elements, h = {:.4}",
        macro_mesh.n_elements(),
        fine.n_nodes(),
        fine.n_elements(),
        fine.h
    );
    let (mut boundary, mut interior, mut interface) = (0, 0, 0);
    for f in fine.facets() {
        match f.kind {
            FacetKind::Boundary => boundary += 1,
            FacetKind::MacroInterior(_) => interior += 1,
            FacetKind::MacroInterface => interface += 1,
        }
    }
    println!(
        "facets: {boundary} boundary, {interior} macro-interior, {interface} on macro interfaces"
    );
    for m in 0..macro_mesh.n_elements() {
        println!(
            "macro {m}: children {:?}, interior facets {:?}",
            fine.children(m),
            fine.macro_interior_facets(m)
        );
    }
    Ok(())
}
