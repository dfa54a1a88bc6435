#!/usr/bin/env node
/**
 * plots <panel> --csv <path>... --out <path>
 * plots mesh --vtk <path> --out <path>
 *
 * Panels: error | eta | iterations | figure (all three side by side) | mesh.
 * The output format follows the --out extension: .svg or .png.
 */

import { readFileSync, writeFileSync } from "node:fs";
import { basename } from "node:path";

import { parseRecord, Series } from "./csv.js";
import { parseVtk } from "./vtk.js";
import {
    PanelKind,
    renderFigureDocument,
    renderMeshDocument,
    renderPanelDocument,
} from "./panels.js";

const USAGE =
    "usage: plots <error|eta|iterations|figure> --csv <record.csv>... --out <file.svg|png>\n" +
    "       plots mesh --vtk <mesh.vtk> --out <file.svg|png>";

interface Args {
    panel: PanelKind;
    csv: string[];
    vtk?: string;
    out: string;
}

export function parseArgs(argv: string[]): Args {
    const [panel, ...rest] = argv;
    const kinds: PanelKind[] = ["error", "eta", "iterations", "mesh", "figure"];
    if (!panel || !kinds.includes(panel as PanelKind)) {
        throw new Error(USAGE);
    }
    const args: Args = { panel: panel as PanelKind, csv: [], out: "" };
    for (let i = 0; i < rest.length; i++) {
        const flag = rest[i];
        const value = rest[i + 1];
        if (value === undefined) throw new Error(`missing value for ${flag}\n${USAGE}`);
        if (flag === "--csv") args.csv.push(value);
        else if (flag === "--vtk") args.vtk = value;
        else if (flag === "--out") args.out = value;
        else throw new Error(`unknown option ${flag}\n${USAGE}`);
        i++;
    }
    if (!args.out) throw new Error(`--out is required\n${USAGE}`);
    if (args.panel === "mesh") {
        if (!args.vtk) throw new Error(`mesh panel requires --vtk\n${USAGE}`);
    } else if (args.csv.length === 0) {
        throw new Error(`${args.panel} panel requires at least one --csv\n${USAGE}`);
    }
    return args;
}

async function writeImage(path: string, svg: string): Promise<void> {
    if (path.toLowerCase().endsWith(".png")) {
        const { default: sharp } = await import("sharp");
        const png = await sharp(Buffer.from(svg)).png().toBuffer();
        writeFileSync(path, png);
    } else {
        writeFileSync(path, svg);
    }
}

export async function main(argv: string[]): Promise<number> {
    let args: Args;
    try {
        args = parseArgs(argv);
    } catch (err) {
        console.error((err as Error).message);
        return 1;
    }
    try {
        let svg: string;
        if (args.panel === "mesh") {
            const mesh = parseVtk(readFileSync(args.vtk!, "utf8"), args.vtk);
            svg = renderMeshDocument(mesh, basename(args.vtk!));
        } else {
            const series: Series[] = args.csv.map((path) =>
                parseRecord(readFileSync(path, "utf8"), basename(path, ".csv")));
            svg = args.panel === "figure"
                ? renderFigureDocument(series)
                : renderPanelDocument(args.panel, series);
        }
        await writeImage(args.out, svg);
        return 0;
    } catch (err) {
        console.error((err as Error).message);
        return 2;
    }
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("plots")) {
    main(process.argv.slice(2)).then((code) => {
        process.exitCode = code;
    });
}
