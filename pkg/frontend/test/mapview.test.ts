import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";

import { renderMap } from "../src/mapview.js";
import { initialState, replay } from "../src/state.js";
import type { MapDocument, StreamEvent } from "../src/types.js";

const fixture = JSON.parse(readFileSync("test/fixtures/hazard_session.json", "utf-8")) as {
  map: MapDocument;
  events_before_decision: StreamEvent[];
};

describe("renderMap", () => {
  it("draws every node and edge of the office map", () => {
    const container = document.createElement("div");
    renderMap(container, initialState(fixture.map), false);
    expect(container.querySelectorAll(".node").length).toBe(26);
    expect(container.querySelectorAll(".edge").length).toBe(fixture.map.edges.length);
    expect(container.querySelector(".route-active")).toBeNull();
  });

  it("highlights exactly the planned route's nodes once one exists", () => {
    const container = document.createElement("div");
    const state = replay(fixture.map, fixture.events_before_decision);
    renderMap(container, state, false);
    const active = container.querySelector(".route-active");
    expect(active).not.toBeNull();
    expect(active!.getAttribute("data-route")).toBe("sc0,sc1,sc2,sc3");
    expect(active!.getAttribute("points")!.split(" ").length).toBe(4);
    // the offered alternative renders in the second colour
    const alt = container.querySelector(".route-alt");
    expect(alt).not.toBeNull();
    expect(alt!.getAttribute("data-route")).toBe("sc1,sc0,nc0,nc1,nc2,elev,sc2,sc3");
  });

  it("shows the believed marker always and ground truth only in debug", () => {
    const container = document.createElement("div");
    const state = replay(fixture.map, fixture.events_before_decision);
    renderMap(container, state, false);
    expect(container.querySelector(".robot-believed")).not.toBeNull();
    expect(container.querySelector(".robot-truth")).toBeNull();
    renderMap(container, state, true);
    expect(container.querySelector(".robot-truth")).not.toBeNull();
  });
});
