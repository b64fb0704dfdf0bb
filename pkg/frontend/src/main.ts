/** Browser bootstrap: wire the store, map, grid, and controls together. */

import { ApiClient } from "./api.js";
import { renderBanner } from "./banner.js";
import { loadConfig } from "./config.js";
import { SearchController, viewportFromCenters } from "./controller.js";
import { renderGrid, renderQueryPanel } from "./grid.js";
import { MapView } from "./map.js";
import { markersFromResults } from "./markers.js";
import {
  K_CHOICES,
  Store,
  applyFailure,
  setIncludeSelf,
  setK,
  setMethod,
  setViewport,
} from "./state.js";

const WORLD_BBOX = [-1e12, -1e12, 1e12, 1e12] as const;

export interface AppHandles {
  store: Store;
  controller: SearchController;
  mapView: MapView;
  api: ApiClient;
}

export async function boot(root: Document = document): Promise<AppHandles> {
  const config = loadConfig();
  const api = new ApiClient(config.apiBase);
  const store = new Store();
  const controller = new SearchController(api, store, config.clickRadiusFraction);

  const canvas = root.getElementById("map") as HTMLCanvasElement;
  const banner = root.getElementById("banner") as HTMLElement;
  const grid = root.getElementById("grid") as HTMLElement;
  const queryPanel = root.getElementById("query-panel") as HTMLElement;
  const corpusInfo = root.getElementById("corpus-info") as HTMLElement;
  const kSelect = root.getElementById("k-select") as HTMLSelectElement;
  const methodSelect = root.getElementById("method-select") as HTMLSelectElement;
  const includeSelfBox = root.getElementById("include-self") as HTMLInputElement;

  for (const k of K_CHOICES) {
    const opt = root.createElement("option");
    opt.value = String(k);
    opt.textContent = `top ${k}`;
    kSelect.appendChild(opt);
  }
  kSelect.value = String(store.get().k);
  methodSelect.value = store.get().method;

  kSelect.addEventListener("change", () => {
    store.update((s) => setK(s, Number(kSelect.value)));
    requery();
  });
  methodSelect.addEventListener("change", () => {
    store.update((s) => setMethod(s, methodSelect.value as "exact" | "lsh"));
    requery();
  });
  includeSelfBox.addEventListener("change", () => {
    store.update((s) => setIncludeSelf(s, includeSelfBox.checked));
    requery();
  });

  function requery(): void {
    const tile = store.get().selectedTile;
    if (tile !== null) void controller.queryTile(tile);
  }

  const mapView = new MapView(canvas, (lon, lat) => {
    void controller.clickToQuery(lon, lat);
  });

  store.subscribe((state) => {
    renderBanner(banner, state);
    renderGrid(grid, state.results, api, (tile) => void controller.queryTile(tile));
    renderQueryPanel(queryPanel, state.selectedTile, api);
    mapView.setMarkers(markersFromResults(state.results), state.selectedTile);
  });

  try {
    const health = await api.health();
    const centers = await api.tilesInBbox(WORLD_BBOX);
    corpusInfo.textContent =
      `${health.corpus_size} tiles | index ${health.index_loaded ? "ready" : "loading"}`;
    const viewport = viewportFromCenters(centers);
    if (viewport !== null) {
      store.update((s) => setViewport(s, viewport));
      mapView.setViewport(viewport);
      mapView.setCenters(centers);
    }
  } catch (err) {
    store.update((s) =>
      applyFailure(s, err instanceof Error ? err.message : String(err)),
    );
  }

  return { store, controller, mapView, api };
}

if (typeof document !== "undefined" && document.getElementById("map") !== null) {
  void boot();
}
