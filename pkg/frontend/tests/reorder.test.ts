import { describe, expect, it } from "vitest";

import { moveItem } from "../src/state.js";

describe("moveItem", () => {
  it("moves an element forward", () => {
    expect(moveItem(["a", "b", "c", "d"], 0, 2)).toEqual(["b", "c", "a", "d"]);
  });

  it("moves an element backward", () => {
    expect(moveItem(["a", "b", "c", "d"], 3, 1)).toEqual(["a", "d", "b", "c"]);
  });

  it("clamps the target position", () => {
    expect(moveItem(["a", "b"], 0, 99)).toEqual(["b", "a"]);
    expect(moveItem(["a", "b"], 1, -5)).toEqual(["b", "a"]);
  });

  it("does not mutate its input", () => {
    const input = ["a", "b", "c"];
    moveItem(input, 0, 2);
    expect(input).toEqual(["a", "b", "c"]);
  });

  it("is a permutation for any move", () => {
    const input = ["a", "b", "c", "d", "e"];
    for (let from = 0; from < input.length; from++) {
      for (let to = 0; to < input.length; to++) {
        expect([...moveItem(input, from, to)].sort()).toEqual([...input].sort());
      }
    }
  });
});
