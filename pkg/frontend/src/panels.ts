/**
 * Panel construction: the three run-record panels (energy error and
 * estimator on log-log axes with a dofs^{-1/2} reference line, iteration
 * counts on a semilog-x axis) and triangle-edge mesh renderings.
 */

import { RunRow, Series } from "./csv.js";
import { TriangleMesh, meshEdges } from "./vtk.js";
import { Scale, el, formatTick, linearScale, logScale, svgDocument, text } from "./svg.js";

export type PanelKind = "error" | "eta" | "iterations" | "mesh" | "figure";

export const PANEL_WIDTH = 420;
export const PANEL_HEIGHT = 360;
const MARGIN = { left: 62, right: 14, top: 30, bottom: 46 };

const COLORS = ["#1f4e9c", "#c42f2f", "#2c8a43", "#8a2c8a", "#c4802f", "#2f8ac4"];

interface DataPanelSpec {
    title: string;
    yLabel: string;
    yLog: boolean;
    value(row: RunRow): number;
    reference: boolean;
}

const DATA_PANELS: Record<Exclude<PanelKind, "mesh" | "figure">, DataPanelSpec> = {
    error: {
        title: "energy-norm error",
        yLabel: "error",
        yLog: true,
        value: (r) => r.energyError,
        reference: true,
    },
    eta: {
        title: "estimator",
        yLabel: "eta",
        yLog: true,
        value: (r) => r.eta,
        reference: true,
    },
    iterations: {
        title: "nonlinear effort",
        yLabel: "iterations+rejections",
        yLog: false,
        value: (r) => r.iterations + r.rejections,
        reference: false,
    },
};

/**
 * dofs^{-1/2} reference anchored at the first data point: in two
 * dimensions O(h) convergence is O(dofs^{-1/2}).
 */
export function referenceLine(rows: RunRow[], value: (r: RunRow) => number):
    Array<[number, number]> {
    const d0 = rows[0].dofs;
    const y0 = value(rows[0]);
    return rows.map((r) => [r.dofs, y0 * Math.sqrt(d0 / r.dofs)]);
}

function axes(x: Scale, y: Scale, xLabel: string, yLabel: string, title: string): string {
    const { left, top } = MARGIN;
    const right = PANEL_WIDTH - MARGIN.right;
    const bottom = PANEL_HEIGHT - MARGIN.bottom;
    const parts: string[] = [];
    parts.push(el("rect", {
        x: left, y: top, width: right - left, height: bottom - top,
        fill: "none", stroke: "#888", "stroke-width": 1,
    }));
    for (const t of x.ticks) {
        const px = x.map(t);
        if (px < left - 0.5 || px > right + 0.5) continue;
        parts.push(el("line", { x1: px, y1: bottom, x2: px, y2: bottom + 5, stroke: "#444" }));
        parts.push(text(formatTick(t), {
            x: px, y: bottom + 18, "text-anchor": "middle", "font-size": 11,
        }));
    }
    for (const t of y.ticks) {
        const py = y.map(t);
        if (py < top - 0.5 || py > bottom + 0.5) continue;
        parts.push(el("line", { x1: left - 5, y1: py, x2: left, y2: py, stroke: "#444" }));
        parts.push(text(formatTick(t), {
            x: left - 8, y: py + 4, "text-anchor": "end", "font-size": 11,
        }));
    }
    parts.push(text(xLabel, {
        x: (left + right) / 2, y: PANEL_HEIGHT - 10, "text-anchor": "middle", "font-size": 12,
    }));
    parts.push(text(yLabel, {
        x: 14, y: (top + bottom) / 2, "text-anchor": "middle", "font-size": 12,
        transform: `rotate(-90 14 ${(top + bottom) / 2})`,
    }));
    parts.push(text(title, {
        x: (left + right) / 2, y: 18, "text-anchor": "middle",
        "font-size": 13, "font-weight": "bold",
    }));
    return parts.join("");
}

function polyline(pts: Array<[number, number]>, x: Scale, y: Scale, color: string,
                  dashed = false): string {
    const coords = pts.map(([a, b]) => `${x.map(a).toFixed(2)},${y.map(b).toFixed(2)}`);
    return el("polyline", {
        points: coords.join(" "),
        fill: "none",
        stroke: color,
        "stroke-width": 1.6,
        ...(dashed ? { "stroke-dasharray": "6 4" } : {}),
    });
}

function markers(pts: Array<[number, number]>, x: Scale, y: Scale, color: string): string {
    return pts.map(([a, b]) => el("circle", {
        cx: x.map(a).toFixed(2), cy: y.map(b).toFixed(2), r: 3, fill: color,
    })).join("");
}

export function renderDataPanel(kind: "error" | "eta" | "iterations",
                                series: Series[]): string {
    if (series.length === 0) throw new Error("no input series");
    const spec = DATA_PANELS[kind];
    const pts = series.map((s) =>
        s.rows.map((r): [number, number] => [r.dofs, spec.value(r)])
            .filter(([, v]) => Number.isFinite(v) && (!spec.yLog || v > 0)));
    if (pts.some((p) => p.length === 0)) {
        throw new Error(`series has no plottable ${kind} values`);
    }
    const ref = spec.reference ? referenceLine(series[0].rows, spec.value) : null;
    const all = pts.flat().concat(ref ?? []);
    const xs = all.map((p) => p[0]);
    const ys = all.map((p) => p[1]);
    const x = logScale(Math.min(...xs), Math.max(...xs) * 1.05,
                       MARGIN.left, PANEL_WIDTH - MARGIN.right);
    const ylo = Math.min(...ys);
    const yhi = Math.max(...ys);
    const y = spec.yLog
        ? logScale(ylo / 1.3, yhi * 1.3, PANEL_HEIGHT - MARGIN.bottom, MARGIN.top)
        : linearScale(0, yhi * 1.08, PANEL_HEIGHT - MARGIN.bottom, MARGIN.top);

    const parts: string[] = [axes(x, y, "dofs", spec.yLabel, spec.title)];
    pts.forEach((p, i) => {
        const color = COLORS[i % COLORS.length];
        parts.push(polyline(p, x, y, color));
        parts.push(markers(p, x, y, color));
        parts.push(text(series[i].label, {
            x: PANEL_WIDTH - MARGIN.right - 6, y: MARGIN.top + 16 + 14 * i,
            "text-anchor": "end", "font-size": 11, fill: color,
        }));
    });
    if (ref) {
        parts.push(polyline(ref, x, y, "#777", true));
        parts.push(text("dofs^-1/2", {
            x: PANEL_WIDTH - MARGIN.right - 6,
            y: MARGIN.top + 16 + 14 * series.length,
            "text-anchor": "end", "font-size": 11, fill: "#777",
        }));
    }
    return el("g", { class: `panel panel-${kind}` }, ...parts);
}

export function renderMeshPanel(mesh: TriangleMesh, label = ""): string {
    const xs = mesh.points.map((p) => p[0]);
    const ys = mesh.points.map((p) => p[1]);
    const lo = [Math.min(...xs), Math.min(...ys)];
    const hi = [Math.max(...xs), Math.max(...ys)];
    const side = Math.min(PANEL_WIDTH - MARGIN.left - MARGIN.right,
                          PANEL_HEIGHT - MARGIN.top - MARGIN.bottom);
    const scale = side / Math.max(hi[0] - lo[0] || 1, hi[1] - lo[1] || 1);
    const ox = MARGIN.left;
    const oy = MARGIN.top + side;
    const px = (p: [number, number]) =>
        `${(ox + (p[0] - lo[0]) * scale).toFixed(2)},${(oy - (p[1] - lo[1]) * scale).toFixed(2)}`;

    const segments = meshEdges(mesh).map(([a, b]) => {
        const [x1, y1] = px(mesh.points[a]).split(",");
        const [x2, y2] = px(mesh.points[b]).split(",");
        return el("line", { x1, y1, x2, y2, stroke: "#1f4e9c", "stroke-width": 0.5 });
    });
    const caption = label
        ? text(label, {
            x: ox + side / 2, y: oy + 24, "text-anchor": "middle", "font-size": 12,
        })
        : "";
    return el("g", { class: "panel panel-mesh" }, ...segments, caption);
}

export function renderPanelDocument(kind: "error" | "eta" | "iterations",
                                    series: Series[]): string {
    return svgDocument(PANEL_WIDTH, PANEL_HEIGHT, renderDataPanel(kind, series));
}

export function renderMeshDocument(mesh: TriangleMesh, label = ""): string {
    return svgDocument(PANEL_WIDTH, PANEL_HEIGHT, renderMeshPanel(mesh, label));
}

/** The three run panels side by side: error, estimator, iterations. */
export function renderFigureDocument(series: Series[]): string {
    const body = (["error", "eta", "iterations"] as const)
        .map((kind, i) => el(
            "g",
            { transform: `translate(${i * PANEL_WIDTH} 0)` },
            renderDataPanel(kind, series),
        ))
        .join("");
    return svgDocument(3 * PANEL_WIDTH, PANEL_HEIGHT, body);
}
