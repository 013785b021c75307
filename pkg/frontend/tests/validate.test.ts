import { describe, expect, it } from "vitest";

import { validateCampaignForm } from "../src/validate.js";

const base = {
  fLoMhz: 400,
  fHiMhz: 800,
  sampleRateHz: 2.4e6,
  strategy: "sequential",
  pipeline: "psd",
  targets: ["sn-a"],
};

describe("campaign form validation", () => {
  it("accepts a TV-band campaign", () => {
    expect(validateCampaignForm(base).ok).toBe(true);
  });

  it("rejects a band below the 20 MHz floor", () => {
    const res = validateCampaignForm({ ...base, fLoMhz: 10, fHiMhz: 12 });
    expect(res.ok).toBe(false);
    expect(res.errors.join(" ")).toContain("floor");
  });

  it("rejects a band above the 6 GHz ceiling", () => {
    const res = validateCampaignForm({ ...base, fHiMhz: 7000 });
    expect(res.ok).toBe(false);
  });

  it("rejects inverted bands and non-positive rates", () => {
    expect(validateCampaignForm({ ...base, fLoMhz: 800, fHiMhz: 400 }).ok).toBe(false);
    expect(validateCampaignForm({ ...base, sampleRateHz: 0 }).ok).toBe(false);
    expect(validateCampaignForm({ ...base, sampleRateHz: -1 }).ok).toBe(false);
  });

  it("requires at least one target and known modes", () => {
    expect(validateCampaignForm({ ...base, targets: [] }).ok).toBe(false);
    expect(validateCampaignForm({ ...base, strategy: "random" }).ok).toBe(false);
    expect(validateCampaignForm({ ...base, pipeline: "fm" }).ok).toBe(false);
  });
});
