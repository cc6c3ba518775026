/* tslint:disable */
/* eslint-disable */

/**
 * Names of the cases [`power_flow`] accepts.
 */
export function demo_cases(): string;

/**
 * Feedback weights of every encoding for a ranking over bit-string topologies.
 */
export function encode_feedback(request_json: string): string;

/**
 * DC power flow of a demo case with the given branch ids open, under a
 * merit-order dispatch, plus the loading metrics and a switching sequence.
 */
export function power_flow(_case: string, open_branches_json: string): string;

/**
 * Parses MATPOWER or native JSON case text and lists validation issues.
 */
export function validate_case(text: string): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly demo_cases: () => [number, number];
    readonly encode_feedback: (a: number, b: number) => [number, number, number, number];
    readonly power_flow: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly validate_case: (a: number, b: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
