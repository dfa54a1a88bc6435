/**
 * Minimal reader for the solver's legacy ASCII VTK meshes
 * (DATASET UNSTRUCTURED_GRID with type-5 triangle cells only).
 */

export interface TriangleMesh {
    points: Array<[number, number]>;
    triangles: Array<[number, number, number]>;
}

export function parseVtk(text: string, label = "mesh"): TriangleMesh {
    const tokens = text.split(/\s+/).filter((t) => t.length > 0);
    const at = (kw: string) => {
        const i = tokens.indexOf(kw);
        if (i < 0) throw new Error(`${label}: missing ${kw} section`);
        return i;
    };

    const p = at("POINTS");
    const npoints = Number(tokens[p + 1]);
    const points: Array<[number, number]> = [];
    for (let i = 0; i < npoints; i++) {
        const base = p + 3 + 3 * i;
        points.push([Number(tokens[base]), Number(tokens[base + 1])]);
    }

    const c = at("CELLS");
    const ncells = Number(tokens[c + 1]);
    const triangles: Array<[number, number, number]> = [];
    let cursor = c + 3;
    for (let i = 0; i < ncells; i++) {
        const size = Number(tokens[cursor]);
        if (size !== 3) {
            throw new Error(`${label}: cell ${i} has ${size} vertices; only triangles are supported`);
        }
        triangles.push([
            Number(tokens[cursor + 1]),
            Number(tokens[cursor + 2]),
            Number(tokens[cursor + 3]),
        ]);
        cursor += 4;
    }

    const t = at("CELL_TYPES");
    for (let i = 0; i < ncells; i++) {
        if (Number(tokens[t + 2 + i]) !== 5) {
            throw new Error(`${label}: cell type ${tokens[t + 2 + i]} is not VTK_TRIANGLE`);
        }
    }
    return { points, triangles };
}

/** Unique undirected edges of the triangulation. */
export function meshEdges(mesh: TriangleMesh): Array<[number, number]> {
    const seen = new Set<number>();
    const out: Array<[number, number]> = [];
    const n = mesh.points.length;
    for (const [a, b, c] of mesh.triangles) {
        for (const [p, q] of [[a, b], [b, c], [c, a]] as const) {
            const lo = Math.min(p, q);
            const hi = Math.max(p, q);
            const key = lo * n + hi;
            if (!seen.has(key)) {
                seen.add(key);
                out.push([lo, hi]);
            }
        }
    }
    return out;
}
