// In-page helpers evaluated over the DevTools evaluate channel.
// Installs window.__chromalayer once; every call takes and returns JSON.
// Node handles are absolute XPaths resolved at call time.
(() => {
  if (window.__chromalayer) return true;

  const table = new Map(); // element -> original style attribute (or null)
  const colors = new Map(); // element -> original inline color declarations
  let mutations = 0;
  new MutationObserver((records) => {
    for (const r of records) if (r.type !== 'attributes') mutations += 1;
  }).observe(document, { childList: true, subtree: true, characterData: true });

  const sheet = new CSSStyleSheet();
  sheet.replaceSync(`
    *, *::before, *::after {
      animation-play-state: paused !important;
      transition-duration: 0s !important;
      transition-delay: 0s !important;
      caret-color: transparent !important;
    }
    *::before { opacity: var(--cl-before-opacity) !important; visibility: var(--cl-before-visibility) !important; }
    *::after { opacity: var(--cl-after-opacity) !important; visibility: var(--cl-after-visibility) !important; }
  `);

  const resolve = (handle) => {
    const [path] = handle.split('::');
    const r = document.evaluate(path, document, null, XPathResult.FIRST_ORDERED_NODE_TYPE, null);
    return r.singleNodeValue;
  };
  const pseudoOf = (handle) => (handle.includes('::') ? handle.split('::')[1] : null);

  const touch = (el) => {
    if (!table.has(el)) table.set(el, el.getAttribute('style'));
  };
  const put = (el, prop, value) => {
    touch(el);
    el.style.setProperty(prop, value, 'important');
  };

  const xpathOf = (el) => {
    const steps = [];
    for (let n = el; n && n.nodeType === 1; n = n.parentElement) {
      let i = 1;
      for (let s = n.previousElementSibling; s; s = s.previousElementSibling) if (s.tagName === n.tagName) i += 1;
      steps.unshift(`${n.tagName.toLowerCase()}[${i}]`);
    }
    return '/' + steps.join('/');
  };

  const STYLE_KEYS = [
    'display', 'visibility', 'opacity', 'position', 'z-index', 'color', 'background-color',
    'background-image', 'font-family', 'font-size', 'font-weight', 'line-height', 'text-align',
    'border-radius', 'border-width', 'overflow', 'transform', 'cursor',
  ];
  const hasBackground = (cs) =>
    cs.backgroundImage !== 'none' || !/rgba\(.*,\s*0\)|transparent/.test(cs.backgroundColor);
  const ownText = (el) =>
    Array.from(el.childNodes)
      .filter((n) => n.nodeType === 3)
      .map((n) => n.textContent.trim())
      .join(' ')
      .trim();
  const rectOf = (r) => ({ x: r.x, y: r.y, width: r.width, height: r.height });
  const snapshot = (cs) => Object.fromEntries(STYLE_KEYS.map((k) => [k, cs.getPropertyValue(k)]));

  const api = {
    collectMetadata() {
      const nodes = [];
      let order = 0;
      for (const el of document.body ? document.body.querySelectorAll('*') : []) {
        const cs = getComputedStyle(el);
        const xpath = xpathOf(el);
        nodes.push({
          xpath, tag: el.tagName.toLowerCase(), doc_order: order++, rect: rectOf(el.getBoundingClientRect()),
          z_index: cs.zIndex, display: cs.display, visibility: cs.visibility, opacity: cs.opacity,
          has_background: hasBackground(cs), text: ownText(el), pseudo: null, computed_style: snapshot(cs),
        });
        for (const p of ['before', 'after']) {
          const ps = getComputedStyle(el, `::${p}`);
          if (ps.content === 'none' || ps.content === 'normal') continue;
          nodes.push({
            xpath: `${xpath}::${p}`, tag: el.tagName.toLowerCase(), doc_order: order++,
            rect: rectOf(el.getBoundingClientRect()), z_index: cs.zIndex, display: ps.display,
            visibility: ps.visibility, opacity: ps.opacity, has_background: hasBackground(ps),
            text: '', pseudo: p, computed_style: snapshot(ps),
          });
        }
      }
      const root = getComputedStyle(document.documentElement).backgroundColor;
      const body = document.body ? getComputedStyle(document.body).backgroundColor : root;
      return {
        node_count: document.getElementsByTagName('*').length,
        root_background: hasBackground({ backgroundImage: 'none', backgroundColor: root }) ? root : body,
        nodes,
      };
    },
    setHidden(handles, hidden) {
      return handles.map((h) => {
        const el = resolve(h);
        if (!el) return 'stale';
        const p = pseudoOf(h);
        if (p) put(el, `--cl-${p}-opacity`, hidden ? '0' : '1');
        else put(el, 'visibility', hidden ? 'hidden' : 'visible');
        return 'ok';
      });
    },
    isolate(target) {
      const el = resolve(target);
      if (!el) return 'stale';
      for (const other of document.body.querySelectorAll('*')) if (other !== el) put(other, 'visibility', 'hidden');
      put(document.body, 'visibility', 'hidden');
      const p = pseudoOf(target);
      if (p) {
        put(el, 'visibility', 'hidden');
        put(el, `--cl-${p}-visibility`, 'visible');
      } else {
        put(el, 'visibility', 'visible');
        for (const q of ['before', 'after']) put(el, `--cl-${q}-opacity`, '0');
      }
      return 'ok';
    },
    hideOwnText(target) {
      const el = resolve(target);
      if (!el) return 'stale';
      put(el, 'color', 'transparent');
      put(el, '-webkit-text-fill-color', 'transparent');
      return 'ok';
    },
    setRootBackground(rgb) {
      const root = document.documentElement;
      if (rgb === null) {
        if (table.has(root)) {
          const orig = table.get(root);
          if (orig === null) root.removeAttribute('style'); else root.setAttribute('style', orig);
          table.delete(root);
        }
        return 'ok';
      }
      put(root, 'background', `rgb(${rgb[0]}, ${rgb[1]}, ${rgb[2]})`);
      return 'ok';
    },
    setTextColor(handle, mode, rgb) {
      const el = resolve(handle);
      if (!el) return 'stale';
      const props = ['color', '-webkit-text-fill-color'];
      if (!colors.has(el)) {
        colors.set(el, props.map((k) => [el.style.getPropertyValue(k), el.style.getPropertyPriority(k)]));
      }
      if (mode === 'restore') {
        colors.get(el).forEach(([v, prio], i) => {
          if (v) el.style.setProperty(props[i], v, prio); else el.style.removeProperty(props[i]);
        });
        colors.delete(el);
        return 'ok';
      }
      const value = mode === 'hidden' ? 'transparent' : `rgb(${rgb[0]}, ${rgb[1]}, ${rgb[2]})`;
      for (const k of props) put(el, k, value);
      return 'ok';
    },
    restoreAll() {
      for (const [el, orig] of table) {
        if (orig === null) el.removeAttribute('style'); else el.setAttribute('style', orig);
      }
      table.clear();
      colors.clear();
      return 'ok';
    },
    inlineStyles() {
      const out = {};
      out[xpathOf(document.documentElement)] = document.documentElement.getAttribute('style');
      for (const el of document.querySelectorAll('body, body *')) out[xpathOf(el)] = el.getAttribute('style');
      return out;
    },
    mutationCount() {
      return mutations;
    },
  };

  document.adoptedStyleSheets = [...document.adoptedStyleSheets, sheet];
  window.__chromalayer = api;
  return true;
})()
