/** Feature ranking editor. Holds one ordering of all feature names and
 *  exposes it as an index permutation; every mutation preserves
 *  permutation validity, so the editor can never submit a broken ranking. */

import { FEATURE_NAMES } from "./features.js";

export class RankingEditor {
  private order: number[];
  private dragFrom = -1;

  constructor(initial?: number[]) {
    if (initial !== undefined && !isPermutation(initial)) {
      throw new Error("initial ranking is not a permutation");
    }
    this.order = initial ? [...initial] : FEATURE_NAMES.map((_, i) => i);
  }

  /** Feature indices from most to least important. */
  permutation(): number[] {
    return [...this.order];
  }

  names(): string[] {
    return this.order.map((i) => FEATURE_NAMES[i]);
  }

  move(from: number, to: number): void {
    const n = this.order.length;
    if (from < 0 || from >= n || to < 0 || to >= n) return;
    const [item] = this.order.splice(from, 1);
    this.order.splice(to, 0, item);
  }

  moveUp(position: number): void {
    this.move(position, position - 1);
  }

  moveDown(position: number): void {
    this.move(position, position + 1);
  }

  reset(): void {
    this.order = FEATURE_NAMES.map((_, i) => i);
  }

  render(container: HTMLElement, onChange?: () => void): void {
    container.innerHTML = "";
    const list = document.createElement("ol");
    list.className = "ranking";
    this.order.forEach((featureIndex, position) => {
      const item = document.createElement("li");
      item.className = "ranking-item";
      item.draggable = true;
      item.dataset.featureIndex = String(featureIndex);
      item.innerHTML = `
        <span class="grip">&#8942;&#8942;</span>
        <span class="feature-name">${FEATURE_NAMES[featureIndex]}</span>
        <span class="controls">
          <button type="button" class="up" aria-label="move up">&#9650;</button>
          <button type="button" class="down" aria-label="move down">&#9660;</button>
        </span>
      `;

      item.querySelector(".up")!.addEventListener("click", () => {
        this.moveUp(position);
        this.render(container, onChange);
        onChange?.();
      });
      item.querySelector(".down")!.addEventListener("click", () => {
        this.moveDown(position);
        this.render(container, onChange);
        onChange?.();
      });

      item.addEventListener("dragstart", (e) => {
        this.dragFrom = position;
        item.classList.add("dragging");
        e.dataTransfer?.setData("text/plain", String(position));
      });
      item.addEventListener("dragend", () => {
        item.classList.remove("dragging");
        this.dragFrom = -1;
      });
      item.addEventListener("dragover", (e) => {
        e.preventDefault();
        if (this.dragFrom !== -1 && this.dragFrom !== position) {
          item.classList.add("drag-over");
        }
      });
      item.addEventListener("dragleave", () => {
        item.classList.remove("drag-over");
      });
      item.addEventListener("drop", (e) => {
        e.preventDefault();
        if (this.dragFrom !== -1 && this.dragFrom !== position) {
          this.move(this.dragFrom, position);
          this.render(container, onChange);
          onChange?.();
        }
      });

      list.appendChild(item);
    });
    container.appendChild(list);
  }
}

export function isPermutation(ranks: number[]): boolean {
  if (ranks.length !== FEATURE_NAMES.length) return false;
  const seen = new Set(ranks);
  if (seen.size !== ranks.length) return false;
  return ranks.every((r) => Number.isInteger(r) && r >= 0 && r < ranks.length);
}
