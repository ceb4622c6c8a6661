/** Keyboard shortcuts for the review loop, kept DOM-free for testing. */

export type ReviewAction = 'prev-frame' | 'next-frame' | 'accept' | 'reject';

export interface KeyInput {
  key: string;
  /** Upper-case tag name of the event target, e.g. 'INPUT'. */
  targetTag?: string;
  editable?: boolean;
  modifier?: boolean;
}

const TYPING_TAGS = new Set(['INPUT', 'TEXTAREA', 'SELECT']);

export function keyAction(input: KeyInput): ReviewAction | null {
  // never steal keys from form fields
  if (input.editable || TYPING_TAGS.has(input.targetTag ?? '')) return null;
  if (input.modifier) return null;
  switch (input.key) {
    case 'ArrowLeft':
      return 'prev-frame';
    case 'ArrowRight':
      return 'next-frame';
    case 'a':
      return 'accept';
    case 'r':
      return 'reject';
    default:
      return null;
  }
}

export function fromKeyboardEvent(e: KeyboardEvent): KeyInput {
  const target = e.target as HTMLElement | null;
  return {
    key: e.key,
    targetTag: target?.tagName,
    editable: Boolean(target?.isContentEditable),
    modifier: e.ctrlKey || e.metaKey || e.altKey,
  };
}
