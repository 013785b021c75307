/** Client-side campaign form validation; mirrors the platform's limits so
 * obviously bad submissions never leave the browser. */

export const PLATFORM_F_LO_HZ = 20e6;
export const PLATFORM_F_HI_HZ = 6e9;

export interface CampaignForm {
  fLoMhz: number;
  fHiMhz: number;
  sampleRateHz: number;
  strategy: string;
  pipeline: string;
  targets: string[];
}

export interface ValidationResult {
  ok: boolean;
  errors: string[];
}

export function validateCampaignForm(form: CampaignForm): ValidationResult {
  const errors: string[] = [];
  const fLo = form.fLoMhz * 1e6;
  const fHi = form.fHiMhz * 1e6;
  if (!Number.isFinite(fLo) || !Number.isFinite(fHi)) {
    errors.push("band edges must be numbers");
  } else {
    if (fLo < PLATFORM_F_LO_HZ)
      errors.push(`band start below platform floor (${PLATFORM_F_LO_HZ / 1e6} MHz)`);
    if (fHi > PLATFORM_F_HI_HZ)
      errors.push(`band end above platform ceiling (${PLATFORM_F_HI_HZ / 1e6} MHz)`);
    if (fHi <= fLo) errors.push("band end must exceed band start");
  }
  if (!(form.sampleRateHz > 0)) errors.push("sample rate must be positive");
  if (!["sequential", "bursty-weighted"].includes(form.strategy))
    errors.push(`unknown strategy: ${form.strategy}`);
  if (!["psd", "iq"].includes(form.pipeline))
    errors.push(`unknown pipeline: ${form.pipeline}`);
  if (form.targets.length === 0) errors.push("select at least one sensor");
  return { ok: errors.length === 0, errors };
}
