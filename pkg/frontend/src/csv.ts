/**
 * Reader for the solver's run-record CSV.
 *
 * The schema is fixed: one row per adaptive step with the exact header
 * below. `energy_error` may be "nan" for problems without an exact
 * solution.
 */

export const CSV_HEADER =
    "step,dofs,eta,eta1,eta2,eta3,energy_error,iterations,rejections,wall_ms";

export interface RunRow {
    step: number;
    dofs: number;
    eta: number;
    eta1: number;
    eta2: number;
    eta3: number;
    energyError: number;
    iterations: number;
    rejections: number;
    wallMs: number;
}

export interface Series {
    label: string;
    rows: RunRow[];
}

export function parseRecord(text: string, label = "record"): Series {
    const lines = text.split(/\r?\n/).filter((l) => l.trim().length > 0);
    if (lines.length === 0) {
        throw new Error(`${label}: empty file`);
    }
    if (lines[0].trim() !== CSV_HEADER) {
        throw new Error(
            `${label}: unexpected header ${JSON.stringify(lines[0])}; ` +
            `expected ${JSON.stringify(CSV_HEADER)}`,
        );
    }
    const rows: RunRow[] = [];
    for (let i = 1; i < lines.length; i++) {
        const parts = lines[i].split(",");
        if (parts.length !== 10) {
            throw new Error(`${label}: line ${i + 1} has ${parts.length} columns, expected 10`);
        }
        const num = (k: number) => {
            const v = Number(parts[k]);
            if (Number.isNaN(v) && parts[k].trim().toLowerCase() !== "nan") {
                throw new Error(`${label}: line ${i + 1} column ${k + 1} is not a number`);
            }
            return v;
        };
        rows.push({
            step: num(0),
            dofs: num(1),
            eta: num(2),
            eta1: num(3),
            eta2: num(4),
            eta3: num(5),
            energyError: num(6),
            iterations: num(7),
            rejections: num(8),
            wallMs: num(9),
        });
    }
    if (rows.length === 0) {
        throw new Error(`${label}: no data rows`);
    }
    return { label, rows };
}
