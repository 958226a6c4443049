/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    eventId(): number;
    constructor(seed: number);
    nextEvent(): number;
    /**
     * Removes the picked TrackHit from its track and refits. Returns a one
     * line description of the change.
     */
    removeHit(hit_path: string): string;
    /**
     * Drawable primitives for the selected types that pass every predicate.
     * `types` and `predicates` are newline-separated; empty means no filter.
     */
    scene(types: string, predicates: string): string;
    /**
     * Energy bookkeeping of the current event.
     */
    summary(): string;
    /**
     * Full type names of the catalog, as a JSON array.
     */
    typeNames(): string;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_eventId: (a: number) => number;
    readonly demo_new: (a: number) => number;
    readonly demo_nextEvent: (a: number) => number;
    readonly demo_removeHit: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_scene: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly demo_summary: (a: number) => [number, number, number, number];
    readonly demo_typeNames: (a: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
