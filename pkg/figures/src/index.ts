export { loadBundle, type Bundle, type Summary } from "./bundle.js";
export { BundleError, column, readTable, rowCount, type Table } from "./csv.js";
export { energyFigure, errorFigure, thin, trackingFigure, widthFigure } from "./figures.js";
export {
  decadeTicks,
  fmt,
  linearScale,
  niceTicks,
  renderFigure,
  tickLabel,
  type FigureSpec,
  type SeriesSpec,
} from "./svg.js";
