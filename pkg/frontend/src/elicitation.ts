/** Decision and anticipation form.
 *
 * The participant types flows for the first two districts; the last
 * district's flow is imputed so the three always sum to the declared
 * competitor count. Over-allocation shows a residual warning and blocks
 * submission, as does a missing district choice.
 */

import type { ResponseBody } from "./types.js";

export interface ElicitationHandle {
  element: HTMLElement;
  getState(): { valid: boolean; body: ResponseBody | null; residual: number };
  onSubmit(handler: (body: ResponseBody) => void): void;
}

export function renderElicitation(
  districts: string[],
  requiredSum: number,
): ElicitationHandle {
  const root = document.createElement("form");
  root.setAttribute("data-role", "elicitation");

  const choiceBox = document.createElement("fieldset");
  const legend = document.createElement("legend");
  legend.textContent = "Where will you search?";
  choiceBox.appendChild(legend);
  const radios: HTMLInputElement[] = [];
  for (const district of districts) {
    const label = document.createElement("label");
    const radio = document.createElement("input");
    radio.type = "radio";
    radio.name = "district";
    radio.value = district;
    radio.setAttribute("data-role", "decision-option");
    radios.push(radio);
    label.appendChild(radio);
    label.appendChild(document.createTextNode(` ${district}`));
    choiceBox.appendChild(label);
  }
  root.appendChild(choiceBox);

  const anticipationBox = document.createElement("fieldset");
  const anticipationLegend = document.createElement("legend");
  anticipationLegend.textContent = `How will the other ${requiredSum} drivers split up?`;
  anticipationBox.appendChild(anticipationLegend);

  const editable = districts.slice(0, -1);
  const imputedDistrict = districts[districts.length - 1];
  const inputs: HTMLInputElement[] = [];
  for (const district of editable) {
    const label = document.createElement("label");
    label.textContent = `${district} `;
    const input = document.createElement("input");
    input.type = "number";
    input.min = "0";
    input.step = "1";
    input.value = "";
    input.setAttribute("data-role", "flow-input");
    input.setAttribute("data-district", district);
    inputs.push(input);
    label.appendChild(input);
    anticipationBox.appendChild(label);
  }
  const imputedLabel = document.createElement("label");
  imputedLabel.textContent = `${imputedDistrict} `;
  const imputed = document.createElement("output");
  imputed.setAttribute("data-role", "imputed-flow");
  imputed.setAttribute("data-district", imputedDistrict);
  imputedLabel.appendChild(imputed);
  anticipationBox.appendChild(imputedLabel);

  const sumLine = document.createElement("p");
  sumLine.setAttribute("data-role", "sum-indicator");
  anticipationBox.appendChild(sumLine);
  const warning = document.createElement("p");
  warning.setAttribute("data-role", "residual-warning");
  warning.style.color = "#b00020";
  warning.hidden = true;
  anticipationBox.appendChild(warning);
  root.appendChild(anticipationBox);

  const submit = document.createElement("button");
  submit.type = "submit";
  submit.textContent = "Submit decision";
  submit.setAttribute("data-role", "submit");
  submit.disabled = true;
  root.appendChild(submit);

  let submitHandler: ((body: ResponseBody) => void) | null = null;

  function parse(input: HTMLInputElement): number | null {
    if (input.value.trim() === "") return null;
    const value = Number(input.value);
    if (!Number.isFinite(value) || value < 0 || !Number.isInteger(value)) {
      return null;
    }
    return value;
  }

  function refresh(): { valid: boolean; body: ResponseBody | null; residual: number } {
    const values = inputs.map(parse);
    const filled = values.every((v) => v !== null);
    const entered = values.reduce((acc: number, v) => acc + (v ?? 0), 0);
    const residual = requiredSum - entered;
    const imputedValue = Math.max(0, residual);
    imputed.value = filled ? String(imputedValue) : "";
    const district = radios.find((r) => r.checked)?.value ?? null;

    const allocated = entered + (filled ? imputedValue : 0);
    sumLine.textContent = filled
      ? `Current flow sum: ${allocated} of ${requiredSum}`
      : `Current flow sum: ${entered} of ${requiredSum}`;

    let valid = filled && district !== null;
    if (filled && residual < 0) {
      warning.hidden = false;
      warning.textContent = `Remove ${-residual} driver${
        residual === -1 ? "" : "s"
      }: the flows exceed the total of ${requiredSum}.`;
      valid = false;
    } else {
      warning.hidden = true;
      warning.textContent = "";
    }
    submit.disabled = !valid;
    if (!valid || district === null) {
      return { valid: false, body: null, residual };
    }
    const anticipated: Record<string, number> = {};
    editable.forEach((d, i) => {
      anticipated[d] = values[i] as number;
    });
    anticipated[imputedDistrict] = imputedValue;
    return { valid: true, body: { district, anticipated }, residual };
  }

  for (const input of inputs) {
    input.addEventListener("input", refresh);
  }
  for (const radio of radios) {
    radio.addEventListener("change", refresh);
  }
  root.addEventListener("submit", (event) => {
    event.preventDefault();
    const state = refresh();
    if (state.valid && state.body && submitHandler) {
      submitHandler(state.body);
    }
  });
  refresh();

  return {
    element: root,
    getState: refresh,
    onSubmit(handler) {
      submitHandler = handler;
    },
  };
}
