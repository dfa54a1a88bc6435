export { CSV_HEADER, parseRecord } from "./csv.js";
export type { RunRow, Series } from "./csv.js";
export { meshEdges, parseVtk } from "./vtk.js";
export type { TriangleMesh } from "./vtk.js";
export {
    PANEL_HEIGHT,
    PANEL_WIDTH,
    referenceLine,
    renderDataPanel,
    renderFigureDocument,
    renderMeshDocument,
    renderMeshPanel,
    renderPanelDocument,
} from "./panels.js";
export type { PanelKind } from "./panels.js";
export { main, parseArgs } from "./cli.js";
